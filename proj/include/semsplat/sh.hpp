#pragma once

#include <span>

#include "semsplat/camera.hpp"

namespace semsplat {

inline constexpr double kShC0 = 0.28209479177387814;

inline int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Evaluates the real SH basis (degree 0..3) for a unit direction into `basis`
/// (length sh_basis_count(degree)).
void sh_basis(int degree, const Vec3& dir, std::span<double> basis);

/// Gradient of each basis function with respect to the unit direction.
/// `dbasis` holds sh_basis_count(degree) rows of 3 components.
void sh_basis_gradient(int degree, const Vec3& dir, std::span<double> dbasis);

/// Color = sum_k basis_k * coeffs[k*3 + c] + 0.5, per channel. Coefficients
/// are stored basis-major, three channels per basis function.
Vec3 sh_to_raw_color(int degree, std::span<const double> coeffs, const Vec3& dir);

} // namespace semsplat
