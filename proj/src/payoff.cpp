#include "gexp/payoff.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace gexp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

Expr Expr::make(Op op, std::vector<Expr> args, double p0, double p1)
{
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    n->p0 = p0;
    n->p1 = p1;
    return Expr(std::move(n));
}

Expr Expr::var(int index)
{
    if (index < 1 || index > 3)
        throw std::invalid_argument("Expr::var: index must be in 1..3");
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->var = index;
    return Expr(std::move(n));
}

Expr Expr::constant(double c) { return make(Op::Const, {}, c); }

Expr operator+(const Expr& a, const Expr& b) { return Expr::make(Expr::Op::Add, {a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::make(Expr::Op::Sub, {a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::make(Expr::Op::Mul, {a, b}); }
Expr operator-(const Expr& a) { return Expr::make(Expr::Op::Neg, {a}); }
Expr abs(const Expr& a) { return Expr::make(Expr::Op::Abs, {a}); }
Expr min(const Expr& a, const Expr& b) { return Expr::make(Expr::Op::Min, {a, b}); }
Expr max(const Expr& a, const Expr& b) { return Expr::make(Expr::Op::Max, {a, b}); }
Expr sq(const Expr& a) { return Expr::make(Expr::Op::Sq, {a}); }
Expr call(const Expr& a, double strike) { return Expr::make(Expr::Op::Call, {a}, strike); }
Expr put(const Expr& a, double strike) { return Expr::make(Expr::Op::Put, {a}, strike); }
Expr clamp(const Expr& a, double lo, double hi)
{
    if (!(lo <= hi))
        throw std::invalid_argument("clamp: lower limit exceeds upper limit");
    return Expr::make(Expr::Op::Clamp, {a}, lo, hi);
}
Expr pow(const Expr& a, int exponent)
{
    if (exponent < 0)
        throw std::invalid_argument("pow: exponent must be nonnegative");
    return Expr::make(Expr::Op::Pow, {a}, exponent);
}

double Expr::operator()(std::span<const double> x) const
{
    const Node& n = *node_;
    switch (n.op) {
    case Op::Var:
        if (static_cast<std::size_t>(n.var) > x.size())
            throw std::out_of_range("payoff: coordinate x" + std::to_string(n.var) + " not supplied");
        return x[n.var - 1];
    case Op::Const: return n.p0;
    case Op::Add: return n.args[0](x) + n.args[1](x);
    case Op::Sub: return n.args[0](x) - n.args[1](x);
    case Op::Mul: return n.args[0](x) * n.args[1](x);
    case Op::Neg: return -n.args[0](x);
    case Op::Abs: return std::abs(n.args[0](x));
    case Op::Min: return std::min(n.args[0](x), n.args[1](x));
    case Op::Max: return std::max(n.args[0](x), n.args[1](x));
    case Op::Sq: {
        const double v = n.args[0](x);
        return v * v;
    }
    case Op::Call: return std::max(n.args[0](x) - n.p0, 0.0);
    case Op::Put: return std::max(n.p0 - n.args[0](x), 0.0);
    case Op::Clamp: return std::clamp(n.args[0](x), n.p0, n.p1);
    case Op::Pow: return std::pow(n.args[0](x), static_cast<int>(n.p0));
    }
    return 0.0;
}

int Expr::max_var() const
{
    if (node_->op == Op::Var)
        return node_->var;
    int m = 0;
    for (const Expr& a : node_->args)
        m = std::max(m, a.max_var());
    return m;
}

Expr Expr::remap(const std::vector<int>& mapping) const
{
    if (node_->op == Op::Var) {
        if (static_cast<std::size_t>(node_->var) > mapping.size())
            throw std::invalid_argument("Expr::remap: mapping too short");
        return var(mapping[node_->var - 1]);
    }
    if (node_->args.empty())
        return *this;
    std::vector<Expr> args;
    args.reserve(node_->args.size());
    for (const Expr& a : node_->args)
        args.push_back(a.remap(mapping));
    return make(node_->op, std::move(args), node_->p0, node_->p1);
}

std::optional<double> Expr::constant_value() const
{
    if (node_->op == Op::Const)
        return node_->p0;
    return std::nullopt;
}

double Expr::lipschitz_bound() const
{
    const Node& n = *node_;
    switch (n.op) {
    case Op::Var: return 1.0;
    case Op::Const: return 0.0;
    case Op::Add:
    case Op::Sub: return n.args[0].lipschitz_bound() + n.args[1].lipschitz_bound();
    case Op::Neg:
    case Op::Abs:
    case Op::Call:
    case Op::Put:
    case Op::Clamp: return n.args[0].lipschitz_bound();
    case Op::Min:
    case Op::Max: return std::max(n.args[0].lipschitz_bound(), n.args[1].lipschitz_bound());
    case Op::Mul: {
        const auto c0 = n.args[0].constant_value();
        const auto c1 = n.args[1].constant_value();
        if (c0)
            return std::abs(*c0) * n.args[1].lipschitz_bound();
        if (c1)
            return std::abs(*c1) * n.args[0].lipschitz_bound();
        const double l0 = n.args[0].lipschitz_bound(), l1 = n.args[1].lipschitz_bound();
        const double s0 = n.args[0].sup_bound(), s1 = n.args[1].sup_bound();
        if (l0 == 0.0 && l1 == 0.0)
            return 0.0;
        return s0 * l1 + s1 * l0;
    }
    case Op::Sq: {
        const double l = n.args[0].lipschitz_bound();
        return l == 0.0 ? 0.0 : 2.0 * n.args[0].sup_bound() * l;
    }
    case Op::Pow: {
        const int k = static_cast<int>(n.p0);
        const double l = n.args[0].lipschitz_bound();
        if (k == 0 || l == 0.0)
            return 0.0;
        return k * std::pow(n.args[0].sup_bound(), k - 1) * l;
    }
    }
    return kInf;
}

namespace {

double mul0(double a, double b) { return a == 0.0 || b == 0.0 ? 0.0 : a * b; }

} // namespace

std::pair<double, double> Expr::range() const
{
    const Node& n = *node_;
    switch (n.op) {
    case Op::Var: return {-kInf, kInf};
    case Op::Const: return {n.p0, n.p0};
    case Op::Add: {
        const auto a = n.args[0].range(), b = n.args[1].range();
        return {a.first + b.first, a.second + b.second};
    }
    case Op::Sub: {
        const auto a = n.args[0].range(), b = n.args[1].range();
        return {a.first - b.second, a.second - b.first};
    }
    case Op::Mul: {
        const auto a = n.args[0].range(), b = n.args[1].range();
        const double c[4] = {mul0(a.first, b.first), mul0(a.first, b.second), mul0(a.second, b.first),
                             mul0(a.second, b.second)};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
    }
    case Op::Neg: {
        const auto a = n.args[0].range();
        return {-a.second, -a.first};
    }
    case Op::Abs:
    case Op::Sq: {
        const auto a = n.args[0].range();
        double lo = (a.first <= 0.0 && a.second >= 0.0) ? 0.0 : std::min(std::abs(a.first), std::abs(a.second));
        double hi = std::max(std::abs(a.first), std::abs(a.second));
        if (n.op == Op::Sq) {
            lo *= lo;
            hi *= hi;
        }
        return {lo, hi};
    }
    case Op::Min: {
        const auto a = n.args[0].range(), b = n.args[1].range();
        return {std::min(a.first, b.first), std::min(a.second, b.second)};
    }
    case Op::Max: {
        const auto a = n.args[0].range(), b = n.args[1].range();
        return {std::max(a.first, b.first), std::max(a.second, b.second)};
    }
    case Op::Call: {
        const auto a = n.args[0].range();
        return {std::max(a.first - n.p0, 0.0), std::max(a.second - n.p0, 0.0)};
    }
    case Op::Put: {
        const auto a = n.args[0].range();
        return {std::max(n.p0 - a.second, 0.0), std::max(n.p0 - a.first, 0.0)};
    }
    case Op::Clamp: {
        const auto a = n.args[0].range();
        return {std::clamp(a.first, n.p0, n.p1), std::clamp(a.second, n.p0, n.p1)};
    }
    case Op::Pow: {
        const auto a = n.args[0].range();
        const int k = static_cast<int>(n.p0);
        if (k == 0)
            return {1.0, 1.0};
        if (k % 2 == 1)
            return {std::pow(a.first, k), std::pow(a.second, k)};
        const double lo = (a.first <= 0.0 && a.second >= 0.0) ? 0.0 : std::min(std::abs(a.first), std::abs(a.second));
        return {std::pow(lo, k), std::pow(std::max(std::abs(a.first), std::abs(a.second)), k)};
    }
    }
    return {-kInf, kInf};
}

double Expr::sup_bound() const
{
    const auto [lo, hi] = range();
    return std::max(std::abs(lo), std::abs(hi));
}

std::string Expr::to_string() const
{
    const Node& n = *node_;
    auto a = [&](int i) { return n.args[i].to_string(); };
    switch (n.op) {
    case Op::Var: return "x" + std::to_string(n.var);
    case Op::Const: return "const(" + format_number(n.p0) + ")";
    case Op::Add: return "(" + a(0) + " + " + a(1) + ")";
    case Op::Sub: return "(" + a(0) + " - " + a(1) + ")";
    case Op::Mul: return "(" + a(0) + " * " + a(1) + ")";
    case Op::Neg: return "neg(" + a(0) + ")";
    case Op::Abs: return "abs(" + a(0) + ")";
    case Op::Min: return "min(" + a(0) + ", " + a(1) + ")";
    case Op::Max: return "max(" + a(0) + ", " + a(1) + ")";
    case Op::Sq: return "sq(" + a(0) + ")";
    case Op::Call: return "call(" + a(0) + ", " + format_number(n.p0) + ")";
    case Op::Put: return "put(" + a(0) + ", " + format_number(n.p0) + ")";
    case Op::Clamp:
        return "clamp(" + a(0) + ", " + format_number(n.p0) + ", " + format_number(n.p1) + ")";
    case Op::Pow: return "pow(" + a(0) + ", " + std::to_string(static_cast<int>(n.p0)) + ")";
    }
    return {};
}

bool operator==(const Expr& a, const Expr& b)
{
    if (a.node_ == b.node_)
        return true;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (x.op != y.op || x.var != y.var || x.p0 != y.p0 || x.p1 != y.p1 || x.args.size() != y.args.size())
        return false;
    for (std::size_t i = 0; i < x.args.size(); ++i)
        if (!(x.args[i] == y.args[i]))
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view s)
        : s_(s)
    {}

    Expr parse()
    {
        Expr e = expr();
        skip();
        if (pos_ != s_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw PayoffParseError("payoff parse error at column " + std::to_string(pos_ + 1) + ": " + what);
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c))
            fail(std::string("expected '") + c + "'");
    }

    Expr expr()
    {
        Expr lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = lhs + term();
            else if (accept('-'))
                lhs = lhs - term();
            else
                return lhs;
        }
    }

    Expr term()
    {
        Expr lhs = unary();
        while (accept('*'))
            lhs = lhs * unary();
        return lhs;
    }

    Expr unary()
    {
        if (accept('-'))
            return -unary();
        return primary();
    }

    double number()
    {
        skip();
        const char* begin = s_.data() + pos_;
        const char* end = s_.data() + s_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc() || ptr == begin)
            fail("expected a number");
        pos_ += static_cast<std::size_t>(ptr - begin);
        return v;
    }

    double signed_number()
    {
        const bool neg = accept('-');
        const double v = number();
        return neg ? -v : v;
    }

    std::string ident()
    {
        skip();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    Expr primary()
    {
        skip();
        if (pos_ >= s_.size())
            fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return Expr::constant(number());
        if (!std::isalpha(static_cast<unsigned char>(c)))
            fail(std::string("unexpected character '") + c + "'");

        const std::size_t name_pos = pos_;
        const std::string name = ident();
        if (name == "x1" || name == "x2" || name == "x3")
            return Expr::var(name[1] - '0');

        expect('(');
        Expr result = Expr::constant(0.0);
        if (name == "const") {
            result = Expr::constant(signed_number());
        } else if (name == "abs") {
            result = abs(expr());
        } else if (name == "neg") {
            result = -expr();
        } else if (name == "sq") {
            result = sq(expr());
        } else if (name == "min" || name == "max") {
            Expr a = expr();
            expect(',');
            Expr b = expr();
            result = name == "min" ? min(a, b) : max(a, b);
        } else if (name == "call" || name == "put") {
            Expr a = expr();
            expect(',');
            const double k = signed_number();
            result = name == "call" ? call(a, k) : put(a, k);
        } else if (name == "clamp") {
            Expr a = expr();
            expect(',');
            const double lo = signed_number();
            expect(',');
            const double hi = signed_number();
            if (!(lo <= hi))
                fail("clamp limits out of order");
            result = clamp(a, lo, hi);
        } else if (name == "pow") {
            Expr a = expr();
            expect(',');
            const double k = number();
            if (k != std::floor(k) || k > 16)
                fail("pow exponent must be an integer in 0..16");
            result = pow(a, static_cast<int>(k));
        } else {
            pos_ = name_pos;
            fail("unknown function '" + name + "'");
        }
        expect(')');
        return result;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace

Expr parse_payoff(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// PayoffSpec

PayoffSpec::PayoffSpec(std::vector<double> times, Expr expr, std::optional<double> lipschitz,
                       std::optional<double> sup_bound)
    : times_(std::move(times))
    , expr_(std::move(expr))
{
    if (times_.empty())
        throw std::invalid_argument("PayoffSpec: at least one monitoring time required");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!(times_[i] > (i == 0 ? 0.0 : times_[i - 1])))
            throw std::invalid_argument("PayoffSpec: monitoring times must be positive and strictly increasing");
    }
    if (times_.back() != 1.0)
        throw std::invalid_argument("PayoffSpec: last monitoring time must equal 1");
    if (expr_.max_var() > n_times())
        throw std::invalid_argument("PayoffSpec: expression references x" + std::to_string(expr_.max_var())
                                    + " but only " + std::to_string(n_times()) + " monitoring times given");
    lipschitz_ = lipschitz.value_or(expr_.lipschitz_bound());
    if (!(lipschitz_ >= 0.0))
        throw std::invalid_argument("PayoffSpec: Lipschitz bound must be nonnegative");
    if (sup_bound) {
        sup_bound_ = sup_bound;
    } else if (const double s = expr_.sup_bound(); std::isfinite(s)) {
        sup_bound_ = s;
    }
}

PayoffSpec PayoffSpec::terminal(Expr expr) { return PayoffSpec({1.0}, std::move(expr)); }

PayoffSpec PayoffSpec::negated() const { return PayoffSpec(times_, -expr_, lipschitz_, sup_bound_); }

PayoffSpec PayoffSpec::absolute() const { return PayoffSpec(times_, abs(expr_), lipschitz_, sup_bound_); }

PayoffSpec PayoffSpec::scaled(double c) const
{
    std::optional<double> s;
    if (sup_bound_)
        s = std::abs(c) * *sup_bound_;
    return PayoffSpec(times_, Expr::constant(c) * expr_, std::abs(c) * lipschitz_, s);
}

PayoffSpec PayoffSpec::shifted(double c) const
{
    std::optional<double> s;
    if (sup_bound_)
        s = *sup_bound_ + std::abs(c);
    return PayoffSpec(times_, expr_ + Expr::constant(c), lipschitz_, s);
}

PayoffSpec PayoffSpec::power(int exponent) const
{
    Expr e = pow(expr_, exponent);
    return PayoffSpec(times_, e);
}

int PayoffSpec::monitoring_index(double t) const
{
    for (std::size_t i = 0; i < times_.size(); ++i)
        if (times_[i] == t)
            return static_cast<int>(i);
    return -1;
}

PayoffSpec PayoffSpec::with_monitoring_time(double t) const
{
    if (monitoring_index(t) >= 0)
        return *this;
    if (!(t > 0.0 && t < 1.0))
        throw std::invalid_argument("with_monitoring_time: t must lie in (0, 1)");
    std::vector<double> times = times_;
    times.insert(std::upper_bound(times.begin(), times.end(), t), t);
    std::vector<int> mapping(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i)
        mapping[i] = static_cast<int>(std::find(times.begin(), times.end(), times_[i]) - times.begin()) + 1;
    return PayoffSpec(times, expr_.remap(mapping), lipschitz_, sup_bound_);
}

PayoffSpec difference(const PayoffSpec& a, const PayoffSpec& b)
{
    std::vector<double> times = a.times();
    for (double t : b.times())
        if (std::find(times.begin(), times.end(), t) == times.end())
            times.push_back(t);
    std::sort(times.begin(), times.end());
    if (times.size() > 3)
        throw std::invalid_argument("difference: combined monitoring grid exceeds 3 dates");
    auto lift = [&](const PayoffSpec& p) {
        std::vector<int> mapping(p.times().size());
        for (std::size_t i = 0; i < p.times().size(); ++i)
            mapping[i] = static_cast<int>(std::find(times.begin(), times.end(), p.times()[i]) - times.begin()) + 1;
        return p.expr().remap(mapping);
    };
    std::optional<double> s;
    if (a.sup_bound() && b.sup_bound())
        s = *a.sup_bound() + *b.sup_bound();
    return PayoffSpec(times, lift(a) - lift(b), a.lipschitz() + b.lipschitz(), s);
}

} // namespace gexp
