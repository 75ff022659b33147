#pragma once

namespace caac::numkit {

// Zeroth-order Bessel function of the first kind.
double BesselJ0(double x);

}  // namespace caac::numkit
