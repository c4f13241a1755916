#ifndef RETRACE_RESULT_HPP
#define RETRACE_RESULT_HPP

#include <cassert>
#include <optional>
#include <utility>
#include <variant>

namespace retrace {

/// Minimal expected-like carrier for fallible operations.
template <class T, class E>
class Result {
 public:
  static Result ok(T value) { return Result(std::in_place_index<0>, std::move(value)); }
  static Result err(E error) { return Result(std::in_place_index<1>, std::move(error)); }

  bool has_value() const { return data_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  T& value() & {
    assert(has_value());
    return std::get<0>(data_);
  }
  const T& value() const& {
    assert(has_value());
    return std::get<0>(data_);
  }
  T&& value() && {
    assert(has_value());
    return std::get<0>(std::move(data_));
  }

  E& error() & {
    assert(!has_value());
    return std::get<1>(data_);
  }
  const E& error() const& {
    assert(!has_value());
    return std::get<1>(data_);
  }
  E&& error() && {
    assert(!has_value());
    return std::get<1>(std::move(data_));
  }

 private:
  template <std::size_t I, class V>
  Result(std::in_place_index_t<I> tag, V&& v) : data_(tag, std::forward<V>(v)) {}

  std::variant<T, E> data_;
};

template <class E>
class Result<void, E> {
 public:
  static Result ok() { return Result(); }
  static Result err(E error) {
    Result r;
    r.error_.emplace(std::move(error));
    return r;
  }

  bool has_value() const { return !error_.has_value(); }
  explicit operator bool() const { return has_value(); }

  E& error() & {
    assert(!has_value());
    return *error_;
  }
  const E& error() const& {
    assert(!has_value());
    return *error_;
  }

 private:
  std::optional<E> error_;
};

}  // namespace retrace

#endif  // RETRACE_RESULT_HPP
