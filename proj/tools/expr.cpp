#include "expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

namespace phaselab::cli {

struct SymbolExpr::Node {
    enum Kind { number, var_x, var_xi, neg, add, sub, mul, div, pow, call, bracket } kind;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::vector<std::shared_ptr<const Node>> args;

    double eval(double x, double xi) const {
        switch (kind) {
            case number: return value;
            case var_x: return x;
            case var_xi: return xi;
            case neg: return -args[0]->eval(x, xi);
            case add: return args[0]->eval(x, xi) + args[1]->eval(x, xi);
            case sub: return args[0]->eval(x, xi) - args[1]->eval(x, xi);
            case mul: return args[0]->eval(x, xi) * args[1]->eval(x, xi);
            case div: return args[0]->eval(x, xi) / args[1]->eval(x, xi);
            case pow: return std::pow(args[0]->eval(x, xi), args[1]->eval(x, xi));
            case call: return fn(args[0]->eval(x, xi));
            case bracket: {
                double s = 1.0;
                for (const auto& a : args) {
                    const double v = a->eval(x, xi);
                    s += v * v;
                }
                return std::sqrt(s);
            }
        }
        return 0.0;
    }
};

namespace {

using NodeP = std::shared_ptr<const SymbolExpr::Node>;
using Node = SymbolExpr::Node;

enum class Tok { number, name, plus, minus, star, slash, caret, lparen, rparen, comma, langle, rangle, end };

struct Token {
    Tok kind;
    std::string text;
    double value = 0.0;
    int column = 0;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::end: return "end of input";
        case Tok::number: return "number '" + t.text + "'";
        case Tok::name: return "name '" + t.text + "'";
        default: return "'" + t.text + "'";
    }
}

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    int col = 1;
    auto is_cont = [](unsigned char c) { return (c & 0xC0) == 0x80; };
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        const int start = col;
        if (std::isspace(c)) {
            ++i;
            ++col;
            continue;
        }
        if (std::isdigit(c) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            const char* b = s.c_str() + i;
            char* e = nullptr;
            const double v = std::strtod(b, &e);
            const std::size_t len = static_cast<std::size_t>(e - b);
            out.push_back({Tok::number, s.substr(i, len), v, start});
            i += len;
            col += static_cast<int>(len);
            continue;
        }
        if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            out.push_back({Tok::name, s.substr(i, j - i), 0.0, start});
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (c >= 0x80) {
            std::size_t j = i + 1;
            while (j < s.size() && is_cont(static_cast<unsigned char>(s[j]))) ++j;
            const std::string cp = s.substr(i, j - i);
            if (cp == "ξ") out.push_back({Tok::name, "xi", 0.0, start});
            else if (cp == "⟨") out.push_back({Tok::langle, cp, 0.0, start});
            else if (cp == "⟩") out.push_back({Tok::rangle, cp, 0.0, start});
            else if (cp == "π") out.push_back({Tok::name, "pi", 0.0, start});
            else if (cp == "×" || cp == "·") out.push_back({Tok::star, cp, 0.0, start});
            else if (cp == "÷") out.push_back({Tok::slash, cp, 0.0, start});
            else if (cp == "−") out.push_back({Tok::minus, cp, 0.0, start});
            else throw ParseError("unexpected character '" + cp + "'", 1, start);
            i = j;
            ++col;
            continue;
        }
        Tok k;
        switch (c) {
            case '+': k = Tok::plus; break;
            case '-': k = Tok::minus; break;
            case '*': k = Tok::star; break;
            case '/': k = Tok::slash; break;
            case '^': k = Tok::caret; break;
            case '(': k = Tok::lparen; break;
            case ')': k = Tok::rparen; break;
            case ',': k = Tok::comma; break;
            default: throw ParseError(std::string("unexpected character '") + s[i] + "'", 1, start);
        }
        out.push_back({k, std::string(1, s[i]), 0.0, start});
        ++i;
        ++col;
    }
    out.push_back({Tok::end, "", 0.0, col});
    return out;
}

double (*function_named(const std::string& name))(double) {
    if (name == "exp") return [](double v) { return std::exp(v); };
    if (name == "sqrt") return [](double v) { return std::sqrt(v); };
    if (name == "log") return [](double v) { return std::log(v); };
    if (name == "sin") return [](double v) { return std::sin(v); };
    if (name == "cos") return [](double v) { return std::cos(v); };
    if (name == "abs") return [](double v) { return std::abs(v); };
    if (name == "erfc") return [](double v) { return std::erfc(v); };
    return nullptr;
}

NodeP make(Node::Kind k, std::vector<NodeP> args = {}, double v = 0.0, double (*fn)(double) = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = v;
    n->fn = fn;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    NodeP parse() {
        NodeP e = expr();
        if (peek().kind != Tok::end) fail("unexpected " + describe(peek()));
        return e;
    }

private:
    std::vector<Token> t_;
    std::size_t p_ = 0;
    std::vector<int> open_;  // columns of unclosed brackets

    const Token& peek() const { return t_[p_]; }
    const Token& next() { return t_[p_++]; }

    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        if (t.kind == Tok::end && !open_.empty())
            throw ParseError(msg + "; bracket opened here is never closed", 1, open_.back());
        throw ParseError(msg, 1, t.column);
    }

    void expect(Tok k, const char* what) {
        if (peek().kind != k) fail(std::string("expected ") + what + ", found " + describe(peek()));
        ++p_;
    }

    NodeP expr() {
        NodeP a = term();
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            const bool plus = next().kind == Tok::plus;
            a = make(plus ? Node::add : Node::sub, {a, term()});
        }
        return a;
    }

    NodeP term() {
        NodeP a = unary();
        while (peek().kind == Tok::star || peek().kind == Tok::slash) {
            const bool mul = next().kind == Tok::star;
            a = make(mul ? Node::mul : Node::div, {a, unary()});
        }
        return a;
    }

    NodeP unary() {
        if (peek().kind == Tok::minus) {
            ++p_;
            return make(Node::neg, {unary()});
        }
        if (peek().kind == Tok::plus) {
            ++p_;
            return unary();
        }
        return power();
    }

    NodeP power() {
        NodeP base = primary();
        if (peek().kind == Tok::caret) {
            ++p_;
            return make(Node::pow, {base, unary()});
        }
        return base;
    }

    // Comma-separated arguments up to `close`; tuples are flattened when `flatten` is set.
    std::vector<NodeP> args(Tok close, const char* close_text, bool flatten) {
        std::vector<NodeP> out;
        if (peek().kind == close) fail("expected an argument, found " + describe(peek()));
        while (true) {
            if (flatten && peek().kind == Tok::lparen && is_tuple()) {
                open_.push_back(next().column);
                for (NodeP& a : args(Tok::rparen, "')'", true)) out.push_back(std::move(a));
            } else {
                out.push_back(expr());
            }
            if (peek().kind == Tok::comma) {
                ++p_;
                continue;
            }
            expect(close, close_text);
            open_.pop_back();
            return out;
        }
    }

    // True when the parenthesis at the cursor encloses a top-level comma.
    bool is_tuple() const {
        int depth = 0;
        for (std::size_t i = p_; i < t_.size(); ++i) {
            const Tok k = t_[i].kind;
            if (k == Tok::lparen || k == Tok::langle) ++depth;
            else if (k == Tok::rparen || k == Tok::rangle) {
                if (--depth == 0) return false;
            } else if (k == Tok::comma && depth == 1) return true;
            else if (k == Tok::end) return false;
        }
        return false;
    }

    NodeP primary() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::number: ++p_; return make(Node::number, {}, t.value);
            case Tok::lparen: {
                open_.push_back(next().column);
                NodeP e = expr();
                expect(Tok::rparen, "')'");
                open_.pop_back();
                return e;
            }
            case Tok::langle: {
                open_.push_back(next().column);
                return make(Node::bracket, args(Tok::rangle, "'⟩'", true));
            }
            case Tok::name: {
                const Token name = next();
                if (name.text == "x") return make(Node::var_x);
                if (name.text == "xi") return make(Node::var_xi);
                if (name.text == "pi") return make(Node::number, {}, pi);
                const bool is_br = name.text == "br";
                double (*fn)(double) = function_named(name.text);
                if (!is_br && !fn) {
                    --p_;
                    fail("unknown name '" + name.text + "'");
                }
                if (peek().kind != Tok::lparen) fail("expected '(' after " + name.text);
                open_.push_back(next().column);
                std::vector<NodeP> a = args(Tok::rparen, "')'", is_br);
                if (is_br) return make(Node::bracket, std::move(a));
                if (a.size() != 1) throw ParseError(name.text + " takes one argument", 1, name.column);
                return make(Node::call, std::move(a), 0.0, fn);
            }
            case Tok::end: fail("expected an expression, found end of input");
            default: fail("expected an expression, found " + describe(t));
        }
    }
};

}  // namespace

double SymbolExpr::operator()(double x, double xi) const { return root_->eval(x, xi); }

SymbolExpr parse_symbol_expr(const std::string& text) {
    if (text.size() > max_expr_length)
        throw ParseError("expression longer than " + std::to_string(max_expr_length) + " characters", 1, 1);
    Parser p(lex(text));
    SymbolExpr e;
    e.root_ = p.parse();
    e.text_ = text;
    return e;
}

}  // namespace phaselab::cli
