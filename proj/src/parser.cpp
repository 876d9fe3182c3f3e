#include <unordered_set>

#include "lexer.hpp"
#include "tarl/error.hpp"
#include "tarl/parse.hpp"

namespace tarl::lang {

namespace {

const std::unordered_set<std::string> kKeywords = {
    "def", "global", "while", "if", "else", "try", "except",
    "pass", "and", "or", "True", "False", "import", "from",
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Program parse_program() {
        Program program;
        while (!at(Token::Kind::End)) {
            if (auto s = parse_statement()) program.statements.push_back(std::move(s));
        }
        return program;
    }

private:
    std::vector<Token> tokens_;
    size_t i_ = 0;

    const Token& cur() const { return tokens_[i_]; }
    const Token& next() const { return tokens_[std::min(i_ + 1, tokens_.size() - 1)]; }
    void advance() { if (i_ + 1 < tokens_.size()) ++i_; }

    bool at(Token::Kind k) const { return cur().kind == k; }
    bool at_op(const char* text) const { return at(Token::Kind::Op) && cur().text == text; }
    bool at_name(const char* text) const { return at(Token::Kind::Name) && cur().text == text; }

    [[noreturn]] void fail(const std::string& m) const {
        throw ParseError(cur().line, cur().column, m);
    }

    void expect_op(const char* text) {
        if (!at_op(text)) fail(std::string("expected '") + text + "'");
        advance();
    }

    void expect_newline() {
        if (!at(Token::Kind::Newline)) fail("expected end of line");
        advance();
    }

    std::string expect_identifier() {
        if (!at(Token::Kind::Name)) fail("expected identifier");
        if (kKeywords.count(cur().text)) fail("keyword '" + cur().text + "' used as identifier");
        std::string name = cur().text;
        advance();
        return name;
    }

    std::vector<StmtPtr> parse_block() {
        expect_op(":");
        expect_newline();
        if (!at(Token::Kind::Indent)) fail("expected an indented block");
        advance();
        std::vector<StmtPtr> body;
        while (!at(Token::Kind::Dedent) && !at(Token::Kind::End)) {
            if (auto s = parse_statement()) body.push_back(std::move(s));
        }
        if (at(Token::Kind::Dedent)) advance();
        return body;
    }

    StmtPtr make(Stmt::Kind kind, const Token& tok) {
        auto s = std::make_unique<Stmt>(kind);
        s->line = tok.line;
        s->column = tok.column;
        return s;
    }

    // Returns nullptr for import/from lines, which are accepted and dropped.
    StmtPtr parse_statement() {
        if (at(Token::Kind::Indent)) fail("unexpected indent");
        const Token& tok = cur();
        if (tok.kind == Token::Kind::Name) {
            const std::string& kw = tok.text;
            if (kw == "def") return parse_funcdef();
            if (kw == "global") return parse_global();
            if (kw == "while") return parse_while();
            if (kw == "if") return parse_if();
            if (kw == "try") return parse_try();
            if (kw == "pass") {
                auto s = make(Stmt::Kind::Pass, tok);
                advance();
                expect_newline();
                return s;
            }
            if (kw == "import" || kw == "from") {
                while (!at(Token::Kind::Newline) && !at(Token::Kind::End)) advance();
                expect_newline();
                return nullptr;
            }
            if (kw == "else" || kw == "except") fail("'" + kw + "' without a matching block");
        }
        return parse_assign_or_expr();
    }

    StmtPtr parse_funcdef() {
        auto s = make(Stmt::Kind::FuncDef, cur());
        advance();
        s->name = expect_identifier();
        expect_op("(");
        if (!at_op(")")) {
            s->params.push_back(expect_identifier());
            while (at_op(",")) {
                advance();
                s->params.push_back(expect_identifier());
            }
        }
        expect_op(")");
        s->body = parse_block();
        return s;
    }

    StmtPtr parse_global() {
        auto s = make(Stmt::Kind::Global, cur());
        advance();
        s->names.push_back(expect_identifier());
        while (at_op(",")) {
            advance();
            s->names.push_back(expect_identifier());
        }
        expect_newline();
        return s;
    }

    StmtPtr parse_while() {
        auto s = make(Stmt::Kind::While, cur());
        advance();
        s->cond = parse_expr();
        s->body = parse_block();
        return s;
    }

    StmtPtr parse_if() {
        auto s = make(Stmt::Kind::If, cur());
        advance();
        s->cond = parse_expr();
        s->body = parse_block();
        if (at_name("else")) {
            advance();
            s->else_body = parse_block();
        }
        return s;
    }

    StmtPtr parse_try() {
        auto s = make(Stmt::Kind::TryExcept, cur());
        advance();
        s->body = parse_block();
        if (!at_name("except")) fail("expected 'except' after try block");
        advance();
        if (!at_op(":")) {
            s->exception_path = expect_identifier();
            while (at_op(".")) {
                advance();
                s->exception_path += "." + expect_identifier();
            }
        }
        s->handler = parse_block();
        return s;
    }

    StmtPtr parse_assign_or_expr() {
        const Token& tok = cur();
        std::vector<ExprPtr> first;
        first.push_back(parse_expr());
        while (at_op(",")) {
            advance();
            first.push_back(parse_expr());
        }
        if (at_op("=")) {
            advance();
            auto s = make(first.size() == 1 ? Stmt::Kind::Assign : Stmt::Kind::MultiAssign, tok);
            for (auto& t : first) {
                if (t->kind != Expr::Kind::Ident && t->kind != Expr::Kind::Attr)
                    throw ParseError(tok.line, tok.column, "assignment target must be a name");
                s->targets.push_back(std::move(t));
            }
            s->values.push_back(parse_expr());
            while (at_op(",")) {
                advance();
                s->values.push_back(parse_expr());
            }
            if (s->values.size() != s->targets.size())
                throw ParseError(tok.line, tok.column, "assignment arity mismatch");
            expect_newline();
            return s;
        }
        if (first.size() != 1) fail("expected '='");
        auto s = make(Stmt::Kind::ExprStmt, tok);
        s->expr = std::move(first[0]);
        expect_newline();
        return s;
    }

    ExprPtr parse_expr() { return parse_or(); }

    ExprPtr parse_or() {
        auto e = parse_and();
        if (!at_name("or")) return e;
        std::vector<ExprPtr> ops;
        ops.push_back(std::move(e));
        while (at_name("or")) {
            advance();
            ops.push_back(parse_and());
        }
        return Expr::make_bool_chain(BoolFold::Or, std::move(ops));
    }

    ExprPtr parse_and() {
        auto e = parse_compare();
        if (!at_name("and")) return e;
        std::vector<ExprPtr> ops;
        ops.push_back(std::move(e));
        while (at_name("and")) {
            advance();
            ops.push_back(parse_compare());
        }
        return Expr::make_bool_chain(BoolFold::And, std::move(ops));
    }

    ExprPtr parse_compare() {
        auto e = parse_arith();
        static const std::pair<const char*, CompareOp> ops[] = {
            {"==", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<=", CompareOp::Le},
            {">=", CompareOp::Ge}, {"<", CompareOp::Lt}, {">", CompareOp::Gt},
        };
        for (const auto& [text, op] : ops) {
            if (at_op(text)) {
                advance();
                return Expr::make_compare(op, std::move(e), parse_arith());
            }
        }
        return e;
    }

    ExprPtr parse_arith() {
        auto e = parse_term();
        while (at_op("+") || at_op("-")) {
            BinaryOp op = at_op("+") ? BinaryOp::Add : BinaryOp::Sub;
            advance();
            e = Expr::make_binary(op, std::move(e), parse_term());
        }
        return e;
    }

    ExprPtr parse_term() {
        auto e = parse_factor();
        while (at_op("*") || at_op("/")) {
            BinaryOp op = at_op("*") ? BinaryOp::Mul : BinaryOp::Div;
            advance();
            e = Expr::make_binary(op, std::move(e), parse_factor());
        }
        return e;
    }

    ExprPtr parse_factor() {
        if (at_op("-") || at_op("+")) {
            UnaryOp op = at_op("-") ? UnaryOp::Neg : UnaryOp::Pos;
            advance();
            return Expr::make_unary(op, parse_factor());
        }
        return parse_postfix();
    }

    ExprPtr parse_postfix() {
        auto e = parse_atom();
        while (true) {
            if (at_op(".")) {
                if (e->kind != Expr::Kind::Ident && e->kind != Expr::Kind::Attr)
                    fail("attribute access needs a plain name base");
                advance();
                std::string part = expect_identifier();
                if (e->kind == Expr::Kind::Ident) {
                    auto attr = Expr::make_attr({e->name, std::move(part)});
                    e = std::move(attr);
                } else {
                    e->parts.push_back(std::move(part));
                }
                continue;
            }
            if (at_op("(")) {
                if (e->kind != Expr::Kind::Ident && e->kind != Expr::Kind::Attr)
                    fail("call needs a named target");
                advance();
                std::vector<CallArg> args;
                if (!at_op(")")) {
                    args.push_back(parse_call_arg());
                    while (at_op(",")) {
                        advance();
                        args.push_back(parse_call_arg());
                    }
                }
                expect_op(")");
                e = Expr::make_call(std::move(e), std::move(args));
                continue;
            }
            return e;
        }
    }

    CallArg parse_call_arg() {
        if (at(Token::Kind::Name) && !kKeywords.count(cur().text) &&
            next().kind == Token::Kind::Op && next().text == "=") {
            std::string keyword = cur().text;
            advance();
            advance();
            return {std::move(keyword), parse_expr()};
        }
        return {std::nullopt, parse_expr()};
    }

    ExprPtr parse_atom() {
        const Token& tok = cur();
        switch (tok.kind) {
            case Token::Kind::Number: {
                auto e = Expr::make_num(tok.num, tok.text);
                advance();
                return e;
            }
            case Token::Kind::Str: {
                auto e = Expr::make_str(tok.text);
                advance();
                return e;
            }
            case Token::Kind::Name: {
                if (tok.text == "True" || tok.text == "False") {
                    auto e = Expr::make_bool(tok.text == "True");
                    advance();
                    return e;
                }
                if (kKeywords.count(tok.text)) fail("unexpected keyword '" + tok.text + "'");
                auto e = Expr::make_ident(tok.text);
                advance();
                return e;
            }
            case Token::Kind::Op:
                if (tok.text == "(") {
                    advance();
                    auto e = parse_expr();
                    expect_op(")");
                    return e;
                }
                fail("unexpected '" + tok.text + "'");
            default:
                fail("expected an expression");
        }
    }
};

}

Program parse(const std::string& text, const std::string& path) {
    Parser parser(lex(text, path));
    return parser.parse_program();
}

}
