#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mela/diagnostics.hpp"

namespace mela {

enum class Tok {
  Ident,
  Number,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Comma,
  Semi,
  Colon,
  Equals,
  Plus,
  Minus,
  Star,
  Slash,
  Hash,
  Bar,
  Dot,
  Arrow,     // ->  or  →
  BackArrow, // <-  or  ←
  Up,        // ↑ (the ASCII form is the identifier `up`)
  Down,      // ↓
  End,
  Error,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  bool integral = false;  // Number token written without '.' or exponent
  SourcePos pos;
};

inline const char* describe(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Colon: return "':'";
    case Tok::Equals: return "'='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Hash: return "'#'";
    case Tok::Bar: return "'|'";
    case Tok::Dot: return "'.'";
    case Tok::Arrow: return "'->'";
    case Tok::BackArrow: return "'<-'";
    case Tok::Up: return "'up'";
    case Tok::Down: return "'down'";
    case Tok::End: return "end of input";
    case Tok::Error: return "invalid character";
  }
  return "?";
}

// Splits UTF-8 source into tokens. `//` starts a line comment. The
// mathematical arrows and the parallel bar are accepted as aliases of
// their ASCII spellings.
class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<Diagnostic>& diags) {
    std::vector<Token> out;
    for (;;) {
      Token t = next();
      if (t.kind == Tok::Error) {
        diags.push_back({Severity::Error, t.pos, "lexical error: unexpected character '" + t.text + "'"});
        continue;
      }
      out.push_back(std::move(t));
      if (out.back().kind == Tok::End) break;
    }
    return out;
  }

 private:
  struct Alias {
    std::string_view utf8;
    Tok kind;
  };

  char peek(std::size_t k = 0) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }

  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i_ < src_.size(); ++k) {
      const unsigned char ch = static_cast<unsigned char>(src_[i_++]);
      if (ch == '\n') {
        ++line_;
        col_ = 1;
      } else if ((ch & 0xC0) != 0x80) {
        ++col_;
      }
    }
  }

  void skip_space() {
    for (;;) {
      const char ch = peek();
      if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
        advance();
      } else if (ch == '/' && peek(1) == '/') {
        while (peek() != '\n' && peek() != '\0') advance();
      } else {
        return;
      }
    }
  }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  Token make(Tok kind, SourcePos pos, std::size_t len) {
    Token t{kind, std::string(src_.substr(i_, len)), 0.0, false, pos};
    advance(len);
    return t;
  }

  Token next() {
    skip_space();
    const SourcePos pos{line_, col_};
    if (i_ >= src_.size()) return Token{Tok::End, "", 0.0, false, pos};
    const char ch = peek();

    static constexpr Alias aliases[] = {
        {"\xE2\x86\x92", Tok::Arrow},      // →
        {"\xE2\x86\x90", Tok::BackArrow},  // ←
        {"\xE2\x86\x91", Tok::Up},         // ↑
        {"\xE2\x86\x93", Tok::Down},       // ↓
        {"\xE2\x88\xA5", Tok::Bar},        // ∥
    };
    for (const auto& a : aliases)
      if (src_.substr(i_, a.utf8.size()) == a.utf8) return make(a.kind, pos, a.utf8.size());

    if (ident_start(ch)) {
      std::size_t n = 0;
      while (ident_char(peek(n))) ++n;
      return make(Tok::Ident, pos, n);
    }
    if (digit(ch)) return number(pos);

    switch (ch) {
      case '(': return make(Tok::LParen, pos, 1);
      case ')': return make(Tok::RParen, pos, 1);
      case '{': return make(Tok::LBrace, pos, 1);
      case '}': return make(Tok::RBrace, pos, 1);
      case '[': return make(Tok::LBracket, pos, 1);
      case ']': return make(Tok::RBracket, pos, 1);
      case ',': return make(Tok::Comma, pos, 1);
      case ';': return make(Tok::Semi, pos, 1);
      case ':': return make(Tok::Colon, pos, 1);
      case '=': return make(Tok::Equals, pos, 1);
      case '+': return make(Tok::Plus, pos, 1);
      case '*': return make(Tok::Star, pos, 1);
      case '/': return make(Tok::Slash, pos, 1);
      case '#': return make(Tok::Hash, pos, 1);
      case '|': return make(Tok::Bar, pos, 1);
      case '.': return make(Tok::Dot, pos, 1);
      case '-': return peek(1) == '>' ? make(Tok::Arrow, pos, 2) : make(Tok::Minus, pos, 1);
      case '<':
        if (peek(1) == '-') return make(Tok::BackArrow, pos, 2);
        break;
      default: break;
    }
    // consume one whole UTF-8 sequence for the error message
    std::size_t n = 1;
    while (i_ + n < src_.size() && (static_cast<unsigned char>(src_[i_ + n]) & 0xC0) == 0x80) ++n;
    return make(Tok::Error, pos, n);
  }

  Token number(SourcePos pos) {
    std::size_t n = 0;
    bool integral = true;
    while (digit(peek(n))) ++n;
    if (peek(n) == '.' && digit(peek(n + 1))) {
      integral = false;
      ++n;
      while (digit(peek(n))) ++n;
    }
    if ((peek(n) == 'e' || peek(n) == 'E') &&
        (digit(peek(n + 1)) || ((peek(n + 1) == '+' || peek(n + 1) == '-') && digit(peek(n + 2))))) {
      integral = false;
      n += 2;
      while (digit(peek(n))) ++n;
    }
    const std::string_view text = src_.substr(i_, n);
    double value = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), value);
    Token t = make(Tok::Number, pos, n);
    t.number = value;
    t.integral = integral;
    return t;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace mela
