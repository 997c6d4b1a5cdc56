#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace truncnorm {

/// Argument outside the domain of an operation (bad bounds, p outside (0,1), ...).
class DomainError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

/// An accept-reject loop exceeded its proposal cap.
class SamplingFailure : public std::runtime_error
{
  public:
    SamplingFailure(const std::string& what, std::uint64_t trials)
        : std::runtime_error(what + " (after " + std::to_string(trials) + " proposals)"), trials_(trials)
    {}

    std::uint64_t trials() const noexcept { return trials_; }

  private:
    std::uint64_t trials_;
};

class NotPositiveDefinite : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A Gibbs state produced an empty slice; the state is outside the region.
class InconsistentState : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

} // namespace truncnorm
