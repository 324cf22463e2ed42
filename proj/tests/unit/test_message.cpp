#include <doctest.h>

#include <random>

#include "support/random_json.hpp"
#include "threedify/mcp/message.hpp"

using namespace threedify::mcp;
using threedify::json;

namespace {

int decode_error(std::string_view line) {
  try {
    decode_message(line);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  return 0;
}

Message random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<std::int64_t> id(-1000000, 1000000);
  switch (kind(rng)) {
    case 0: return Message::request(id(rng), testgen::random_string(rng), testgen::random_object(rng, 3));
    case 1: return Message::notification(testgen::random_string(rng), testgen::random_object(rng, 3));
    case 2: return Message::response(id(rng), testgen::random_value(rng, 3));
    default: {
      RpcError err{std::uniform_int_distribution<int>(-32768, 32767)(rng), testgen::random_string(rng), std::nullopt};
      if (std::bernoulli_distribution(0.5)(rng)) err.data = testgen::random_value(rng, 2);
      std::optional<std::int64_t> maybe_id;
      if (std::bernoulli_distribution(0.8)(rng)) maybe_id = id(rng);
      return Message::failure(maybe_id, std::move(err));
    }
  }
}

}  // namespace

TEST_CASE("request encodes to one line and back") {
  const auto msg = Message::request(1, "tools/list");
  const auto line = encode_message(msg);
  CHECK(line == R"({"id":1,"jsonrpc":"2.0","method":"tools/list","params":{}})");
  CHECK(decode_message(line) == msg);
}

TEST_CASE("decode errors") {
  CHECK(decode_error("not json") == error_code::parse_error);
  CHECK(decode_error("") == error_code::parse_error);
  CHECK(decode_error("[1,2]") == error_code::invalid_request);
  CHECK(decode_error(R"({"id":1,"method":"x"})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"1.0","id":1,"method":"x"})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","id":1})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","id":"a","method":"x"})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","id":1,"method":7})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","id":1,"result":1,"error":{}})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","result":1})") == error_code::invalid_request);
  CHECK(decode_error(R"({"jsonrpc":"2.0","id":null,"method":"x"})") == error_code::invalid_request);
}

TEST_CASE("invalid request keeps the recoverable id") {
  try {
    decode_message(R"({"jsonrpc":"2.0","id":9,"method":[]})");
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(e.id() == 9);
  }
}

TEST_CASE("notification and error response shapes") {
  CHECK(encode_message(Message::notification("notifications/initialized")) ==
        R"({"jsonrpc":"2.0","method":"notifications/initialized","params":{}})");
  CHECK(encode_message(Message::failure(std::nullopt, {-32700, "parse error", std::nullopt})) ==
        R"({"error":{"code":-32700,"message":"parse error"},"id":null,"jsonrpc":"2.0"})");
}

TEST_CASE("round trip over 500 random messages") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto msg = random_message(rng);
    const auto line = encode_message(msg);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(decode_message(line) == msg);
  }
}

TEST_CASE("error names are stable") {
  CHECK(error_name(error_code::unknown_tool) == "unknown_tool");
  CHECK(error_name(error_code::method_not_found) == "method_not_found");
  CHECK(error_name(12345).empty());
}
