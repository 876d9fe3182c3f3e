#include <string>

#include "tarl/parse.hpp"

namespace tarl::lang {

namespace {

// Precedence floor for parenthesization; higher binds tighter.
enum : int { kOr = 1, kAnd = 2, kCmp = 3, kAdd = 4, kMul = 5, kUnary = 6, kAtom = 7 };

int level_of(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::BoolChain: return e.fold == BoolFold::Or ? kOr : kAnd;
        case Expr::Kind::Compare: return kCmp;
        case Expr::Kind::Binary:
            return (e.bin_op == BinaryOp::Add || e.bin_op == BinaryOp::Sub) ? kAdd : kMul;
        case Expr::Kind::Unary: return kUnary;
        default: return kAtom;
    }
}

std::string render(const Expr& e, int floor);

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        switch (c) {
            case '\'': out += "\\'"; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += "'";
    return out;
}

std::string render_bare(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Num:
            return e.num_text;
        case Expr::Kind::Bool:
            return e.bool_value ? "True" : "False";
        case Expr::Kind::Str:
            return quote(e.str_value);
        case Expr::Kind::Ident:
            return e.name;
        case Expr::Kind::Attr: {
            std::string out = e.parts[0];
            for (size_t i = 1; i < e.parts.size(); ++i) out += "." + e.parts[i];
            return out;
        }
        case Expr::Kind::Binary: {
            const char* op = e.bin_op == BinaryOp::Add ? " + "
                             : e.bin_op == BinaryOp::Sub ? " - "
                             : e.bin_op == BinaryOp::Mul ? " * "
                                                         : " / ";
            int lv = level_of(e);
            return render(*e.lhs, lv) + op + render(*e.rhs, lv + 1);
        }
        case Expr::Kind::Compare: {
            const char* op = nullptr;
            switch (e.cmp_op) {
                case CompareOp::Lt: op = " < "; break;
                case CompareOp::Gt: op = " > "; break;
                case CompareOp::Le: op = " <= "; break;
                case CompareOp::Ge: op = " >= "; break;
                case CompareOp::Eq: op = " == "; break;
                case CompareOp::Ne: op = " != "; break;
            }
            return render(*e.lhs, kCmp + 1) + op + render(*e.rhs, kCmp + 1);
        }
        case Expr::Kind::BoolChain: {
            int lv = level_of(e);
            const char* op = e.fold == BoolFold::Or ? " or " : " and ";
            std::string out = render(*e.operands[0], lv + 1);
            for (size_t i = 1; i < e.operands.size(); ++i) out += op + render(*e.operands[i], lv + 1);
            return out;
        }
        case Expr::Kind::Unary:
            return (e.un_op == UnaryOp::Neg ? "-" : "+") + render(*e.operand, kUnary);
        case Expr::Kind::Call: {
            std::string out = render_bare(*e.callee) + "(";
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ", ";
                if (e.args[i].keyword) out += *e.args[i].keyword + "=";
                out += render(*e.args[i].value, kOr);
            }
            out += ")";
            return out;
        }
    }
    return "";
}

std::string render(const Expr& e, int floor) {
    std::string out = render_bare(e);
    if (level_of(e) < floor) return "(" + out + ")";
    return out;
}

std::string join_exprs(const std::vector<ExprPtr>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += render(*xs[i], kOr);
    }
    return out;
}

std::string join_names(const std::vector<std::string>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += xs[i];
    }
    return out;
}

// Statement's own line without trailing colon or body.
std::string head_text(const Stmt& s) {
    switch (s.kind) {
        case Stmt::Kind::FuncDef:
            return "def " + s.name + "(" + join_names(s.params) + ")";
        case Stmt::Kind::Assign:
        case Stmt::Kind::MultiAssign:
            return join_exprs(s.targets) + " = " + join_exprs(s.values);
        case Stmt::Kind::Global:
            return "global " + join_names(s.names);
        case Stmt::Kind::While:
            return "while " + render(*s.cond, kOr);
        case Stmt::Kind::If:
            return "if " + render(*s.cond, kOr);
        case Stmt::Kind::TryExcept:
            return "try";
        case Stmt::Kind::ExprStmt:
            return render(*s.expr, kOr);
        case Stmt::Kind::Pass:
            return "pass";
    }
    return "";
}

void render_stmt(const Stmt& s, int depth, std::string& out) {
    std::string pad(static_cast<size_t>(depth) * 4, ' ');
    auto block = [&](const std::vector<StmtPtr>& body) {
        for (const auto& child : body) render_stmt(*child, depth + 1, out);
    };
    switch (s.kind) {
        case Stmt::Kind::FuncDef:
        case Stmt::Kind::While:
            out += pad + head_text(s) + ":\n";
            block(s.body);
            return;
        case Stmt::Kind::If:
            out += pad + head_text(s) + ":\n";
            block(s.body);
            if (!s.else_body.empty()) {
                out += pad + "else:\n";
                block(s.else_body);
            }
            return;
        case Stmt::Kind::TryExcept:
            out += pad + "try:\n";
            block(s.body);
            out += pad + "except" + (s.exception_path.empty() ? "" : " " + s.exception_path) + ":\n";
            block(s.handler);
            return;
        default:
            out += pad + head_text(s) + "\n";
            return;
    }
}

void walk_expr(Expr& e, const std::function<void(Expr&)>& fn) {
    fn(e);
    if (e.lhs) walk_expr(*e.lhs, fn);
    if (e.rhs) walk_expr(*e.rhs, fn);
    if (e.operand) walk_expr(*e.operand, fn);
    for (auto& op : e.operands) walk_expr(*op, fn);
    if (e.callee) walk_expr(*e.callee, fn);
    for (auto& a : e.args) walk_expr(*a.value, fn);
}

void walk_stmt_exprs(Stmt& s, const std::function<void(Expr&)>& fn) {
    for (auto& t : s.targets) walk_expr(*t, fn);
    for (auto& v : s.values) walk_expr(*v, fn);
    if (s.cond) walk_expr(*s.cond, fn);
    if (s.expr) walk_expr(*s.expr, fn);
}

void collect_in_body(std::vector<StmtPtr>& body, std::vector<NumericLiteralRef>& out) {
    for (auto& sp : body) {
        Stmt* s = sp.get();
        walk_stmt_exprs(*s, [&](Expr& e) {
            if (e.kind == Expr::Kind::Num)
                out.push_back({s, &e, static_cast<int>(out.size())});
        });
        collect_in_body(s->body, out);
        collect_in_body(s->else_body, out);
        collect_in_body(s->handler, out);
    }
}

}

std::string unparse(const Program& program) {
    std::string out;
    for (const auto& s : program.statements) render_stmt(*s, 0, out);
    return out;
}

std::string stmt_text(const Stmt& stmt) { return head_text(stmt); }

std::string expr_text(const Expr& expr) { return render(expr, kOr); }

std::vector<NumericLiteralRef> find_numeric_literals(Program& program) {
    std::vector<NumericLiteralRef> out;
    for (auto& sp : program.statements) {
        if (sp->kind == Stmt::Kind::FuncDef) collect_in_body(sp->body, out);
    }
    return out;
}

}
