#include "distopt/errors.hpp"

#include <sstream>

namespace distopt {

namespace {

std::string describe(const char* head, double value, const char* unit)
{
    std::ostringstream out;
    out << head << value << unit;
    return out.str();
}

}  // namespace

NonPositivePressure::NonPositivePressure(double p)
    : InvalidInput(describe("pressure must be positive, got ", p, " kPa")), pressure(p)
{
}

LengthMismatch::LengthMismatch(std::size_t expected, std::size_t actual)
    : InvalidInput("length mismatch: expected " + std::to_string(expected) + ", got " +
                   std::to_string(actual))
{
}

TemperatureOutOfRange::TemperatureOutOfRange(std::string name, double t)
    : Error(describe(("temperature out of range for " + name + ": ").c_str(), t, " K")),
      component(std::move(name)),
      temperature(t)
{
}

NoConvergence::NoConvergence(const std::string& what, double r, int its)
    : Error(what + " did not converge (residual " + std::to_string(r) + " after " +
            std::to_string(its) + " iterations)"),
      residual(r),
      iterations(its)
{
}

CompositionOutOfTolerance::CompositionOutOfTolerance(const std::string& scenario, double s)
    : SchemaError("composition of scenario '" + scenario + "' sums to " + std::to_string(s) +
                  " (allowed 0.99..1.01)"),
      sum(s)
{
}

InitializationFailed::InitializationFailed(int col, const std::string& reason)
    : Error("initialization failed in column " + std::to_string(col) + ": " + reason), column(col)
{
}

PoolTooSmall::PoolTooSmall(std::size_t pool, std::size_t mu)
    : Error("selection pool of " + std::to_string(pool) + " is smaller than mu = " +
            std::to_string(mu))
{
}

}  // namespace distopt
