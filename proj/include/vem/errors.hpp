#pragma once

#include <stdexcept>
#include <string>

namespace vem {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// node < 0 means not tied to a grid node
struct NonFiniteEvaluation : Error {
    int node;
    std::string term;
    NonFiniteEvaluation(const std::string& what, int node_ = -1, std::string term_ = {})
        : Error(what + (node_ >= 0 ? " at node " + std::to_string(node_) : std::string())),
          node(node_), term(std::move(term_)) {}
};

struct GridTooSmall : Error { using Error::Error; };
struct BadHorizon : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ModeError : Error { using Error::Error; };
struct IllConditionedTransition : Error { using Error::Error; };
struct SingularHessian : Error { using Error::Error; };
struct NoCycloid : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct StiffnessFailure : Error { using Error::Error; };
struct Divergence : Error { using Error::Error; };

}  // namespace vem
