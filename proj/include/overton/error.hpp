#pragma once

#include <stdexcept>
#include <string>

namespace overton {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data is malformed or inconsistent.
class DataError : public Error {
public:
    enum class Kind { missing_file, schema, integrity, empty_matrix };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A numerical procedure cannot produce a defined result for its input.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace overton
