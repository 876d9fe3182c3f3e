#include "lexer.hpp"

#include <cctype>
#include <cstdlib>

#include "tarl/error.hpp"

namespace tarl::lang {

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct LineLexer {
    const std::string& src;
    size_t pos;
    int line;
    std::vector<Token>& out;

    int col() const {
        size_t start = src.rfind('\n', pos == 0 ? 0 : pos - 1);
        start = (start == std::string::npos) ? 0 : start + 1;
        return static_cast<int>(pos - start) + 1;
    }

    [[noreturn]] void fail(const std::string& m) { throw ParseError(line, col(), m); }

    void push(Token::Kind k, std::string text, double num = 0.0) {
        out.push_back({k, std::move(text), num, line, col()});
    }

    char peek(size_t ahead = 0) const {
        return pos + ahead < src.size() ? src[pos + ahead] : '\0';
    }

    void lex_number() {
        size_t start = pos;
        int start_col = col();
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
        if (peek() == '.') {
            ++pos;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
        }
        if (peek() == 'e' || peek() == 'E') {
            size_t mark = pos;
            ++pos;
            if (peek() == '+' || peek() == '-') ++pos;
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
            } else {
                pos = mark;  // `1e` is a number then a name, let the parser object
            }
        }
        std::string text = src.substr(start, pos - start);
        out.push_back({Token::Kind::Number, text, std::strtod(text.c_str(), nullptr), line, start_col});
    }

    void lex_string() {
        char quote = peek();
        int start_col = col();
        ++pos;
        std::string value;
        while (true) {
            char c = peek();
            if (c == '\0' || c == '\n') throw ParseError(line, col(), "unterminated string");
            ++pos;
            if (c == quote) break;
            if (c == '\\') {
                char esc = peek();
                ++pos;
                switch (esc) {
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case '\\': value += '\\'; break;
                    case '\'': value += '\''; break;
                    case '"': value += '"'; break;
                    default: throw ParseError(line, col(), "unsupported escape");
                }
            } else {
                value += c;
            }
        }
        out.push_back({Token::Kind::Str, value, 0.0, line, start_col});
    }

    // Lexes one physical line's tokens; returns false if the line held none.
    bool run() {
        bool any = false;
        while (true) {
            char c = peek();
            if (c == '\0' || c == '\n') return any;
            if (c == ' ') { ++pos; continue; }
            if (c == '\t') fail("tab outside indentation");
            if (c == '#') {
                while (peek() != '\0' && peek() != '\n') ++pos;
                return any;
            }
            any = true;
            if (std::isdigit(static_cast<unsigned char>(c))) { lex_number(); continue; }
            if (is_name_start(c)) {
                size_t start = pos;
                int start_col = col();
                while (is_name_char(peek())) ++pos;
                out.push_back({Token::Kind::Name, src.substr(start, pos - start), 0.0, line, start_col});
                continue;
            }
            if (c == '\'' || c == '"') { lex_string(); continue; }
            char n = peek(1);
            if ((c == '=' && n == '=') || (c == '!' && n == '=') ||
                (c == '<' && n == '=') || (c == '>' && n == '=')) {
                push(Token::Kind::Op, std::string{c, n});
                pos += 2;
                continue;
            }
            if (std::string("=<>+-*/(),:.").find(c) != std::string::npos) {
                push(Token::Kind::Op, std::string(1, c));
                ++pos;
                continue;
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    }
};

}

std::vector<Token> lex(const std::string& text, const std::string& path) {
    (void)path;
    std::vector<Token> out;
    std::vector<int> indents{0};
    size_t pos = 0;
    int line = 0;
    while (pos <= text.size()) {
        if (pos == text.size() && line > 0) break;
        ++line;
        size_t line_start = pos;
        int width = 0;
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) {
            if (text[pos] == '\t') throw ParseError(line, static_cast<int>(pos - line_start) + 1,
                                                    "tab in indentation");
            ++width;
            ++pos;
        }
        size_t content_start = pos;
        LineLexer ll{text, pos, line, out};
        size_t mark = out.size();
        bool any = ll.run();
        pos = ll.pos;
        if (!any) {
            out.resize(mark);
        } else {
            if (width > indents.back()) {
                out.insert(out.begin() + static_cast<long>(mark),
                           {Token::Kind::Indent, "", 0.0, line, 1});
                indents.push_back(width);
            } else if (width < indents.back()) {
                size_t at = mark;
                while (width < indents.back()) {
                    indents.pop_back();
                    out.insert(out.begin() + static_cast<long>(at),
                               {Token::Kind::Dedent, "", 0.0, line, 1});
                    ++at;
                }
                if (width != indents.back())
                    throw ParseError(line, static_cast<int>(content_start - line_start) + 1,
                                     "unindent does not match any outer level");
            }
            out.push_back({Token::Kind::Newline, "", 0.0, line,
                           static_cast<int>(pos - line_start) + 1});
        }
        if (pos < text.size() && text[pos] == '\n') ++pos;
        else break;
    }
    while (indents.size() > 1) {
        indents.pop_back();
        out.push_back({Token::Kind::Dedent, "", 0.0, line + 1, 1});
    }
    out.push_back({Token::Kind::End, "", 0.0, line + 1, 1});
    return out;
}

}
