#ifndef GEXP_PAYOFF_HPP
#define GEXP_PAYOFF_HPP

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gexp {

// Composable payoff expression over coordinates x1..x3 (x_k = B at the k-th
// monitoring time).
class Expr {
public:
    enum class Op { Var, Const, Add, Sub, Mul, Neg, Abs, Min, Max, Sq, Call, Put, Clamp, Pow };

    static Expr var(int index); // 1-based
    static Expr constant(double c);

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

    friend Expr abs(const Expr& a);
    friend Expr min(const Expr& a, const Expr& b);
    friend Expr max(const Expr& a, const Expr& b);
    friend Expr sq(const Expr& a);
    friend Expr call(const Expr& a, double strike);
    friend Expr put(const Expr& a, double strike);
    friend Expr clamp(const Expr& a, double lo, double hi);
    friend Expr pow(const Expr& a, int exponent);

    double operator()(std::span<const double> x) const;

    Op op() const { return node_->op; }
    // Largest 1-based variable index referenced, 0 for constants.
    int max_var() const;
    // Renumber variables: index k becomes mapping[k - 1].
    Expr remap(const std::vector<int>& mapping) const;

    // Lipschitz bound in the max-norm of the coordinates; +inf when unknown.
    double lipschitz_bound() const;
    // Bound on |value|; +inf when unbounded.
    double sup_bound() const;
    // Interval enclosing every value, by interval arithmetic over the tree.
    std::pair<double, double> range() const;
    // True when the expression is a constant.
    std::optional<double> constant_value() const;

    // Canonical mini-language text; parse_payoff(to_string()) reproduces the tree.
    std::string to_string() const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    struct Node {
        Op op = Op::Const;
        int var = 0;
        double p0 = 0.0;
        double p1 = 0.0;
        std::vector<Expr> args;
    };
    explicit Expr(std::shared_ptr<const Node> n)
        : node_(std::move(n))
    {}
    static Expr make(Op op, std::vector<Expr> args, double p0 = 0.0, double p1 = 0.0);

    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr abs(const Expr& a);
Expr min(const Expr& a, const Expr& b);
Expr max(const Expr& a, const Expr& b);
Expr sq(const Expr& a);
Expr call(const Expr& a, double strike);
Expr put(const Expr& a, double strike);
Expr clamp(const Expr& a, double lo, double hi);
Expr pow(const Expr& a, int exponent);

class PayoffParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Recursive-descent parser for the payoff mini-language:
//   expr    := term (('+' | '-') term)*
//   term    := unary ('*' unary)*
//   unary   := '-' unary | primary
//   primary := number | x1 | x2 | x3 | '(' expr ')'
//            | const(c) | abs(e) | neg(e) | sq(e) | min(e, e) | max(e, e)
//            | call(e, K) | put(e, K) | clamp(e, lo, hi) | pow(e, n)
Expr parse_payoff(std::string_view text);

// Cylinder payoff phi(B_t1, ..., B_tn).
class PayoffSpec {
public:
    PayoffSpec(std::vector<double> times, Expr expr,
               std::optional<double> lipschitz = std::nullopt,
               std::optional<double> sup_bound = std::nullopt);

    // phi(B_1).
    static PayoffSpec terminal(Expr expr);

    const std::vector<double>& times() const { return times_; }
    int n_times() const { return static_cast<int>(times_.size()); }
    const Expr& expr() const { return expr_; }
    double lipschitz() const { return lipschitz_; }
    std::optional<double> sup_bound() const { return sup_bound_; }
    bool is_bounded() const { return sup_bound_.has_value(); }

    double operator()(std::span<const double> x) const { return expr_(x); }

    PayoffSpec negated() const;
    PayoffSpec absolute() const;
    PayoffSpec scaled(double c) const;
    PayoffSpec shifted(double c) const;
    PayoffSpec power(int exponent) const;
    // Same random variable with t added to the monitoring times.
    PayoffSpec with_monitoring_time(double t) const;
    // Index of t in times(), or -1.
    int monitoring_index(double t) const;

private:
    std::vector<double> times_;
    Expr expr_;
    double lipschitz_;
    std::optional<double> sup_bound_;
};

// Payoff of (phi1 - phi2) on the union of both monitoring grids.
PayoffSpec difference(const PayoffSpec& a, const PayoffSpec& b);

} // namespace gexp

#endif // GEXP_PAYOFF_HPP
