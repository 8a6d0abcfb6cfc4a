/// @file test_util.cpp
/// Hashing, timestamp conversion, base64.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsab/util.hpp"

using namespace tsab;

TEST_CASE("sha256 known vectors") {
    CHECK(util::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(util::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(util::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("parse_timestamp accepts both documented formats") {
    CHECK(util::parse_timestamp("1970-01-01 00:00:00") == 0.0);
    CHECK(util::parse_timestamp("1970-01-02") == 86400.0);
    CHECK(util::parse_timestamp("2017-01-09 05:41:00") == 1483940460.0);
    CHECK_FALSE(util::parse_timestamp("09/01/2017").has_value());
    CHECK_FALSE(util::parse_timestamp("yesterday").has_value());
    CHECK_FALSE(util::parse_timestamp("2017-01-09T05:41:00Z").has_value());
}

TEST_CASE("format_timestamp round-trips parse_timestamp") {
    for (const char* text : {"2017-01-09 05:41:00", "1999-12-31 23:59:59", "2024-02-29 12:00:00"}) {
        const auto epoch = util::parse_timestamp(text);
        REQUIRE(epoch.has_value());
        CHECK(util::format_timestamp(*epoch) == text);
    }
    CHECK(util::format_timestamp(0.0) == "1970-01-01 00:00:00");
}

TEST_CASE("base64 encodes the RFC 4648 vectors") {
    const auto enc = [](const std::string& s) {
        return util::base64_encode(std::vector<std::uint8_t>(s.begin(), s.end()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foob") == "Zm9vYg==");
    CHECK(enc("fooba") == "Zm9vYmE=");
    CHECK(enc("foobar") == "Zm9vYmFy");
}
