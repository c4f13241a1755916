#ifndef RETRACE_LEXER_HPP
#define RETRACE_LEXER_HPP

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

namespace retrace {

struct ParseError {
  std::size_t line = 1;
  std::size_t col = 1;
  std::string detail;

  std::string message() const {
    return "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + detail;
  }
};

namespace detail {

struct Token {
  enum class Kind { Ident, Int, Punct, End, Error };
  Kind kind = Kind::End;
  std::string text;
  std::int64_t number = 0;
  std::size_t line = 1;
  std::size_t col = 1;
};

// Hand-rolled tokenizer shared by the trace-set and source-program readers.
// Punctuation covers both grammars; `line_comment` is "#" or "//".
class Lexer {
 public:
  Lexer(std::string_view input, std::string_view line_comment)
      : input_(input), comment_(line_comment) {
    advance();
  }

  const Token& peek() const { return current_; }

  Token next() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws_and_comments();
    current_ = Token{};
    current_.line = line_;
    current_.col = col_;
    if (pos_ >= input_.size()) {
      current_.kind = Token::Kind::End;
      return;
    }
    char c = input_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < input_.size() &&
             (std::isalnum(static_cast<unsigned char>(input_[pos_])) || input_[pos_] == '_'))
        bump();
      current_.kind = Token::Kind::Ident;
      current_.text = std::string(input_.substr(start, pos_ - start));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < input_.size() &&
         std::isdigit(static_cast<unsigned char>(input_[pos_ + 1])))) {
      std::size_t start = pos_;
      if (c == '-') bump();
      while (pos_ < input_.size() && std::isdigit(static_cast<unsigned char>(input_[pos_])))
        bump();
      current_.kind = Token::Kind::Int;
      current_.text = std::string(input_.substr(start, pos_ - start));
      current_.number = std::stoll(current_.text);
      return;
    }
    if (c == '-' && pos_ + 1 < input_.size() && input_[pos_ + 1] == '>') {
      bump();
      bump();
      current_.kind = Token::Kind::Punct;
      current_.text = "->";
      return;
    }
    if (c == '&' && pos_ + 1 < input_.size() && input_[pos_ + 1] == '&') {
      bump();
      bump();
      current_.kind = Token::Kind::Punct;
      current_.text = "&&";
      return;
    }
    if (std::string_view("{}().;=,").find(c) != std::string_view::npos) {
      bump();
      current_.kind = Token::Kind::Punct;
      current_.text = std::string(1, c);
      return;
    }
    current_.kind = Token::Kind::Error;
    current_.text = std::string(1, c);
  }

  void skip_ws_and_comments() {
    while (pos_ < input_.size()) {
      char c = input_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (!comment_.empty() && input_.substr(pos_).starts_with(comment_)) {
        while (pos_ < input_.size() && input_[pos_] != '\n') bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (input_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view input_;
  std::string_view comment_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  Token current_;
};

}  // namespace detail
}  // namespace retrace

#endif  // RETRACE_LEXER_HPP
