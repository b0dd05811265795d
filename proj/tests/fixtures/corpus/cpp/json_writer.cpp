#include <sstream>
#include <string>
#include <string_view>

namespace json {

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out += c;
    }
  }
  return out;
}

class Writer {
 public:
  Writer& begin_object() {
    comma();
    os_ << '{';
    first_ = true;
    return *this;
  }
  Writer& end_object() {
    os_ << '}';
    first_ = false;
    return *this;
  }
  Writer& key(std::string_view k) {
    comma();
    os_ << '"' << escape(k) << "\":";
    first_ = true;
    return *this;
  }
  Writer& value(std::string_view v) {
    comma();
    os_ << '"' << escape(v) << '"';
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  void comma() {
    if (!first_) {
      os_ << ',';
    }
    first_ = false;
  }
  std::ostringstream os_;
  bool first_ = true;
};

std::string sample_document() {
  Writer w;
  w.begin_object().key("name").value("scopes {demo}").key("kind").value("(fixture)").end_object();
  return w.str();
}

}  // namespace json
