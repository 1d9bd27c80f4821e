#include "stlsplit/parser.hpp"

#include <cctype>
#include <optional>
#include <vector>

namespace stlsplit {

namespace {

enum class Tok {
  True,
  Ident,
  Not,
  And,
  Or,
  Arrow,
  OpG,
  OpF,
  OpH,
  OpO,
  OpU,
  LBracket,
  RBracket,
  LParen,
  RParen,
  Comma,
  Number,
  Inf,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      int line = line_, col = col_;
      if (pos_ >= text_.size()) {
        out.push_back({Tok::End, "", line, col});
        break;
      }
      char c = text_[pos_];
      if (c == '(') {
        out.push_back({Tok::LParen, "(", line, col});
        advance();
      } else if (c == ')') {
        out.push_back({Tok::RParen, ")", line, col});
        advance();
      } else if (c == '[') {
        out.push_back({Tok::LBracket, "[", line, col});
        advance();
      } else if (c == ']') {
        out.push_back({Tok::RBracket, "]", line, col});
        advance();
      } else if (c == ',') {
        out.push_back({Tok::Comma, ",", line, col});
        advance();
      } else if (c == '-') {
        advance();
        if (pos_ < text_.size() && text_[pos_] == '>') {
          advance();
          out.push_back({Tok::Arrow, "->", line, col});
        } else {
          throw ParseError("unexpected character '-'", line, col);
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::string num;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          num += text_[pos_];
          advance();
        }
        out.push_back({Tok::Number, num, line, col});
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string word;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
          word += text_[pos_];
          advance();
        }
        out.push_back({keyword(word), word, line, col});
      } else {
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
      }
    }
    return out;
  }

 private:
  static Tok keyword(const std::string& w) {
    if (w == "true") return Tok::True;
    if (w == "not") return Tok::Not;
    if (w == "and") return Tok::And;
    if (w == "or") return Tok::Or;
    if (w == "inf") return Tok::Inf;
    if (w == "G") return Tok::OpG;
    if (w == "F") return Tok::OpF;
    if (w == "H") return Tok::OpH;
    if (w == "O") return Tok::OpO;
    if (w == "U") return Tok::OpU;
    return Tok::Ident;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      advance();
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const std::set<std::string>& preds)
      : toks_(std::move(toks)), preds_(preds) {}

  Formula parse() {
    Formula f = parse_implies();
    expect(Tok::End, "end of input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }

  Token take() { return toks_[pos_++]; }

  void expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) {
      throw ParseError("expected " + what + ", found '" + peek().text + "'", peek().line,
                       peek().col);
    }
    ++pos_;
  }

  // "->" lowest, right-associative.
  Formula parse_implies() {
    Formula lhs = parse_or();
    if (peek().kind == Tok::Arrow) {
      take();
      Formula rhs = parse_implies();
      return Formula::implies(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula parse_or() {
    Formula lhs = parse_and();
    while (peek().kind == Tok::Or) {
      take();
      lhs = Formula::disj(std::move(lhs), parse_and());
    }
    return lhs;
  }

  Formula parse_and() {
    Formula lhs = parse_until();
    while (peek().kind == Tok::And) {
      take();
      lhs = Formula::conj(std::move(lhs), parse_until());
    }
    return lhs;
  }

  Formula parse_until() {
    Formula lhs = parse_unary();
    while (peek().kind == Tok::OpU) {
      take();
      Interval iv = parse_interval();
      lhs = Formula::until(iv, std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Formula parse_unary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Not:
        take();
        return Formula::negate(parse_unary());
      case Tok::OpG: {
        take();
        Interval iv = parse_interval();
        return Formula::always(iv, parse_unary());
      }
      case Tok::OpF: {
        take();
        Interval iv = parse_interval();
        return Formula::eventually(iv, parse_unary());
      }
      case Tok::OpH: {
        take();
        Interval iv = parse_interval();
        return Formula::historically(iv, parse_unary());
      }
      case Tok::OpO: {
        take();
        Interval iv = parse_interval();
        return Formula::once(iv, parse_unary());
      }
      default:
        return parse_atom();
    }
  }

  Formula parse_atom() {
    const Token t = take();
    switch (t.kind) {
      case Tok::True:
        return Formula::top();
      case Tok::Ident:
        if (!preds_.contains(t.text)) {
          throw ParseError("unknown predicate '" + t.text + "'", t.line, t.col);
        }
        return Formula::pred(t.text);
      case Tok::LParen: {
        Formula f = parse_implies();
        expect(Tok::RParen, "')'");
        return f;
      }
      default:
        throw ParseError("expected formula, found '" + t.text + "'", t.line, t.col);
    }
  }

  Interval parse_interval() {
    const Token open = peek();
    expect(Tok::LBracket, "'['");
    int lo = parse_number();
    expect(Tok::Comma, "','");
    std::optional<int> hi;
    if (peek().kind == Tok::Inf) {
      take();
    } else {
      hi = parse_number();
    }
    expect(Tok::RBracket, "']'");
    if (hi && *hi < lo) {
      throw ParseError("inverted interval bounds", open.line, open.col);
    }
    return hi ? Interval::bounded(lo, *hi) : Interval::open_ended(lo);
  }

  int parse_number() {
    const Token t = peek();
    expect(Tok::Number, "number");
    return std::stoi(t.text);
  }

  std::vector<Token> toks_;
  const std::set<std::string>& preds_;
  size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(const std::string& text, const std::set<std::string>& predicate_table) {
  Lexer lex(text);
  Parser parser(lex.run(), predicate_table);
  return parser.parse();
}

}  // namespace stlsplit
