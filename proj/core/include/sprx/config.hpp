#pragma once

// The library is normally built in single precision. A double-precision
// flavour (sprx_core_f64) is compiled from the same sources into a distinct
// inline namespace so both can be linked into one test binary.
#if defined(SPRX_USE_DOUBLE)
#define SPRX_PRECISION_NS f64
#else
#define SPRX_PRECISION_NS f32
#endif

namespace sprx {
inline namespace SPRX_PRECISION_NS {

#if defined(SPRX_USE_DOUBLE)
using real = double;
#else
using real = float;
#endif

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
