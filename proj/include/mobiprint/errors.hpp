#pragma once

#include <stdexcept>
#include <string>

namespace mobiprint {

/// Malformed input text (scenario file, G-code, measurements CSV).
/// Carries a 1-based line number when one is known (0 otherwise).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Structurally valid input that violates a domain invariant.
/// The message names the violated invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Command stream reached in an impossible machine state
/// (e.g. a move before any feedrate is known).
class StateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// separating_halfspace called with a query point on or inside the polytope.
class PointInsidePolytope : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A reference sample lies within a margin-inflated obstacle; the
/// convexified avoidance constraint is undefined there.
class ReferenceInsideObstacle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pause/Resume alternation violated in a print-channel event stream.
class MalformedEventStream : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Calibration episode produced no identifying disturbance signal.
class DegenerateCalibration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mobiprint
