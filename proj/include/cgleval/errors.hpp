#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgleval {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FileNotFound : public Error {
public:
    using Error::Error;
};

class MalformedImage : public Error {
public:
    using Error::Error;
};

/// A pixel (or map entry) carries a class id outside [0, num_classes).
class ClassIdOutOfRange : public Error {
public:
    ClassIdOutOfRange(int value, std::size_t position, const std::string& what)
        : Error(what), value(value), position(position) {}
    explicit ClassIdOutOfRange(const std::string& what) : Error(what) {}

    int value = -1;
    std::size_t position = 0; // linear row-major index
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ClassCountMismatch : public Error {
public:
    using Error::Error;
};

class AllClassesUndefined : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DirectoryNotFound : public Error {
public:
    using Error::Error;
};

class NoPairsFound : public Error {
public:
    using Error::Error;
};

} // namespace cgleval
