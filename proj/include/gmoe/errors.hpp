#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmoe {

/// Raised when an input violates a mathematical precondition (non-SPD
/// covariance, empty measure, dimension mismatch, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The solvability order of a polynomial system is not known for this
/// cell size. `lower_bound` is the best published bound, or 0 when none.
class UnsupportedOrderError : public DomainError {
public:
    UnsupportedOrderError(int cell_size, int lower_bound, const std::string& what)
        : DomainError(what), cell_size_(cell_size), lower_bound_(lower_bound) {}

    int cell_size() const noexcept { return cell_size_; }
    int lower_bound() const noexcept { return lower_bound_; }

private:
    int cell_size_;
    int lower_bound_;
};

/// A fitted component lost (numerically) all of its responsibility mass.
class DegenerateComponentError : public DomainError {
public:
    DegenerateComponentError(std::size_t component, int iteration, const std::string& what)
        : DomainError(what), component_(component), iteration_(iteration) {}

    std::size_t component() const noexcept { return component_; }
    /// EM iteration at which the collapse happened, -1 outside of fit().
    int iteration() const noexcept { return iteration_; }

private:
    std::size_t component_;
    int iteration_;
};

}  // namespace gmoe
