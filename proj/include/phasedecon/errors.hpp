#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phasedecon {

class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! Raised when an integral or optimizer produces a non-finite value.
class NumericalFailure : public std::runtime_error
{
public:
  explicit NumericalFailure(const std::string& what,
                            std::size_t iteration = 0,
                            double step = 0.0)
    : std::runtime_error(what)
    , iteration_(iteration)
    , step_(step)
  {}

  std::size_t iteration() const { return iteration_; }
  double step() const { return step_; }

private:
  std::size_t iteration_;
  double step_;
};

class InsufficientReplicates : public std::runtime_error
{
public:
  explicit InsufficientReplicates(std::string id)
    : std::runtime_error("insufficient replicates for id '" + id +
                         "' (need at least 2, or a sigma column)")
    , id_(std::move(id))
  {}

  const std::string& id() const { return id_; }

private:
  std::string id_;
};

class ParseError : public std::runtime_error
{
public:
  ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

} // namespace phasedecon
