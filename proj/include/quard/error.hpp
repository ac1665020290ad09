/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <stdexcept>
#include <string>

namespace quard {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed action values or tokens. Carries the offending dimension name.
class CodecError : public Error {
public:
    CodecError(std::string dimension, const std::string& what)
        : Error(what), dimension_(std::move(dimension)) {}

    const std::string& dimension() const noexcept { return dimension_; }

private:
    std::string dimension_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SimError : public Error {
public:
    using Error::Error;
};

class NoPathError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace quard
