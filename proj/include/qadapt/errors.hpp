#pragma once

#include <stdexcept>
#include <string>

namespace qadapt {

// Configuration value or argument outside its documented range. Messages name
// the offending key or quantity and the expected range.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Grid voltage magnitude fell below the operating floor; division by ||v_g||
// is no longer meaningful.
class GridLostError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The DC link left its valid operating region and the model's 1/v_dc term is
// no longer integrable.
class SimulationDivergedError : public std::runtime_error {
public:
    SimulationDivergedError(const std::string& what, double time_s)
        : std::runtime_error(what), time_s_(time_s) {}
    double time_s() const { return time_s_; }

private:
    double time_s_;
};

// An optimization was requested over an empty feasible set.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Measured behaviour contradicts a precondition of the analysis, e.g. a
// non-decaying inner-loop step response.
class AssumptionViolatedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace qadapt
