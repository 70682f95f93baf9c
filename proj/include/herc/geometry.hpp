#pragma once

// Closed-form operations on the Poincare ball B^{n,c} = {x : c*|x|^2 < 1}
// (sectional curvature -c) and the block-diagonal Givens isometries.
//
// Every operation comes in two flavours: a value-returning one for callers
// that want convenience, and an `_into` one writing into caller-owned
// storage for the hot loops in the model and gradient code. Both check
// their preconditions; the `_into` forms additionally require `out` to have
// the input's length and to not alias a different input.

#include <span>
#include <vector>

namespace herc::geometry {

// Margin kept between projected points and the ball boundary.
inline constexpr double kBallEpsilon = 1e-5;

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using Span = std::span<double>;

double dot(ConstSpan a, ConstSpan b);
double squared_norm(ConstSpan a);

// Numerically stable inverse hyperbolic tangent, 0.5*log1p(2x/(1-x)).
double artanh(double x);

// softplus(x) = ln(1 + e^x), overflow free; underflows to 0 below about -745.
double softplus(double x);
// d softplus / dx, the logistic sigmoid.
double sigmoid(double x);

// tanh(r)/r and artanh(r)/r with their r -> 0 limits.
double tanh_ratio(double r);
double artanh_ratio(double r);

// Exponential map at the origin: tanh(sqrt(c)|u|) u / (sqrt(c)|u|).
Vec exp0(ConstSpan u, double c);
void exp0_into(ConstSpan u, double c, Span out);

// Logarithmic map at the origin; throws std::domain_error unless c|v|^2 < 1.
Vec log0(ConstSpan v, double c);
void log0_into(ConstSpan v, double c, Span out);

// Mobius (gyrovector) addition x (+)_c y.
Vec mobius_add(ConstSpan x, ConstSpan y, double c);
void mobius_add_into(ConstSpan x, ConstSpan y, double c, Span out);

// Geodesic distance (2/sqrt(c)) artanh(sqrt(c) |(-x) (+)_c y|).
double hyp_distance(ConstSpan x, ConstSpan y, double c);

// Pulls x back to norm (1 - eps)/sqrt(c) when it reaches past it.
Vec project_to_ball(ConstSpan x, double c);
void project_to_ball_into(ConstSpan x, double c, Span out);

// Block-diagonal Givens rotation: pair (x_{2i}, x_{2i+1}) is multiplied by
// [[cos t, -sin t], [sin t, cos t]] with t = angles[i].
Vec givens_rotate(ConstSpan x, ConstSpan angles);
void givens_rotate_into(ConstSpan x, ConstSpan angles, Span out);

// Block-diagonal Givens reflection with blocks [[cos t, sin t], [sin t, -cos t]].
Vec givens_reflect(ConstSpan x, ConstSpan angles);
void givens_reflect_into(ConstSpan x, ConstSpan angles, Span out);

}  // namespace herc::geometry
