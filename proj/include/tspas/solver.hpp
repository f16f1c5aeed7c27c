#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tspas {

/// The two portfolio solvers. EAX is the positive class wherever a binary
/// convention is needed.
enum class Solver : unsigned char { EAX = 0, LKH = 1 };

inline constexpr std::array<Solver, 2> kSolvers = {Solver::EAX, Solver::LKH};

inline constexpr std::size_t index_of(Solver s) { return static_cast<std::size_t>(s); }

inline constexpr Solver other(Solver s) { return s == Solver::EAX ? Solver::LKH : Solver::EAX; }

inline std::string_view to_string(Solver s) { return s == Solver::EAX ? "EAX" : "LKH"; }

inline Solver parse_solver(std::string_view s) {
    if (s == "EAX") return Solver::EAX;
    if (s == "LKH") return Solver::LKH;
    throw std::invalid_argument("unknown solver '" + std::string(s) + "' (expected EAX or LKH)");
}

}  // namespace tspas
