#pragma once

#include <string>
#include <vector>

namespace tarl::lang {

struct Token {
    enum class Kind { Name, Number, Str, Op, Newline, Indent, Dedent, End };

    Kind kind;
    std::string text;   // Name/Op verbatim; Number exact spelling; Str decoded value
    double num = 0.0;
    int line = 0;
    int column = 0;
};

// Tokenizes the whole source. Each physical line is one logical line; there
// is no bracket continuation. Blank and comment-only lines vanish. Indent
// changes surface as Indent/Dedent tokens; tabs in indentation are rejected.
std::vector<Token> lex(const std::string& text, const std::string& path);

}
