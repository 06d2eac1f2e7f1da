// SPDX-License-Identifier: Apache-2.0
//
// ckmsense - environment-aware NLoS sensing with channel angle-delay maps
// Copyright (C) 2026 The ckmsense Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CKMSENSE_COMMON_HPP
#define CKMSENSE_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ckmsense
{

/// Speed of light in m/s (exact SI value).
inline constexpr double kSpeedOfLight = 299'792'458.0;

inline constexpr double kPi = std::numbers::pi;

// ---- Error types --------------------------------------------------------

struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Coincident or otherwise degenerate positions.
struct DegenerateGeometryError : Error
{
    using Error::Error;
};

/// Observation values outside their physical domain (e.g. non-positive delay).
struct InvalidObservationError : Error
{
    using Error::Error;
};

/// NaN or Inf produced inside a numeric kernel.
struct NumericFailureError : Error
{
    using Error::Error;
};

/// A location outside the scene rectangle where one is required.
struct OutOfBoundsError : Error
{
    using Error::Error;
};

struct TrainingFailureError : Error
{
    using Error::Error;
};

/// Malformed, truncated or version-mismatched file payloads.
struct FormatError : Error
{
    using Error::Error;
};

struct LocalizationFailureError : Error
{
    using Error::Error;
};

struct ConfigError : Error
{
    using Error::Error;
};

// ---- 2-D points ---------------------------------------------------------

struct Point2
{
    double x = 0.0; // meters
    double y = 0.0; // meters

    friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point2 a, Point2 b) = default;

    double norm() const { return std::hypot(x, y); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a)
{
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi)
        r += 2.0 * kPi;
    return r;
}

/// Axis-aligned scene rectangle [0, width] x [0, height].
struct Bounds
{
    double width = 100.0;
    double height = 100.0;

    bool contains(Point2 p) const
    {
        return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
    }
    Point2 clamp(Point2 p) const
    {
        return {std::fmin(std::fmax(p.x, 0.0), width), std::fmin(std::fmax(p.y, 0.0), height)};
    }
    double diagonal() const { return std::hypot(width, height); }
    friend constexpr bool operator==(const Bounds &, const Bounds &) = default;
};

// ---- Seeds --------------------------------------------------------------

/// One round of the splitmix64 finalizer.
inline constexpr std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a counter path,
/// e.g. derive_seed(master, {point, trial, method}).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t k : path)
        s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    return s;
}

} // namespace ckmsense

#endif
