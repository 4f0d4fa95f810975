#include "eef/common/codec.hpp"

#include <charconv>

namespace eef {

FieldWriter& FieldWriter::put(std::string_view field) {
  out_ += std::to_string(field.size());
  out_ += ':';
  out_.append(field);
  return *this;
}

FieldWriter& FieldWriter::put_int(std::int64_t v) { return put(std::to_string(v)); }

FieldWriter& FieldWriter::put_uint(std::uint64_t v) { return put(std::to_string(v)); }

std::string_view FieldReader::next() {
  auto colon = in_.find(':', pos_);
  if (colon == std::string_view::npos || colon == pos_)
    throw CodecError("malformed field header at offset " + std::to_string(pos_));
  std::size_t len = 0;
  auto [ptr, ec] = std::from_chars(in_.data() + pos_, in_.data() + colon, len);
  if (ec != std::errc{} || ptr != in_.data() + colon)
    throw CodecError("malformed field length at offset " + std::to_string(pos_));
  if (len > in_.size() - colon - 1)
    throw CodecError("truncated field at offset " + std::to_string(pos_));
  std::string_view field = in_.substr(colon + 1, len);
  pos_ = colon + 1 + len;
  return field;
}

std::int64_t FieldReader::next_int() {
  auto f = next();
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    throw CodecError("expected integer field, got '" + std::string(f) + "'");
  return v;
}

std::uint64_t FieldReader::next_uint() {
  auto f = next();
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    throw CodecError("expected unsigned field, got '" + std::string(f) + "'");
  return v;
}

void FieldReader::expect_done() const {
  if (!done()) throw CodecError("trailing bytes after offset " + std::to_string(pos_));
}

}  // namespace eef
