#include <catch_amalgamated.hpp>

#include <random>
#include <thread>

#include "fake_transport.hpp"
#include "mmv/error.hpp"
#include "mmv/llm.hpp"

using namespace mmv;

namespace {

LlmRequest request(std::string purpose = "forensic") {
  LlmRequest r;
  r.purpose = std::move(purpose);
  r.system = "You are a fact checker.";
  r.user = "Check this.";
  r.images = {{"image/jpeg", "QUJD"}};
  return r;
}

json random_value(std::mt19937& rng, int depth) {
  static const std::vector<std::string> words = {"date",   "{braces}", "quote \" inside", "back\\slash", "Lyman",
                                                 "} close", "48.97",   "",                "\xd0\x9b\xd0\xb8"};
  switch (depth > 2 ? rng() % 4 : rng() % 6) {
    case 0: return words[rng() % words.size()];
    case 1: return static_cast<int>(rng() % 1000) - 500;
    case 2: return rng() % 2 == 0;
    case 3: return nullptr;
    case 4: {
      json a = json::array();
      for (std::size_t i = rng() % 4; i > 0; --i) a.push_back(random_value(rng, depth + 1));
      return a;
    }
    default: {
      json o = json::object();
      for (std::size_t i = rng() % 4; i > 0; --i) o[words[rng() % words.size()]] = random_value(rng, depth + 1);
      return o;
    }
  }
}

std::string prose(std::mt19937& rng) {
  static const std::vector<std::string> bits = {"Here is the analysis", "Sure.", "The result follows:", "\n",
                                                "note: dates vary", "(see above)", "[1]", "Done"};
  std::string out;
  for (std::size_t i = rng() % 4; i > 0; --i) out += bits[rng() % bits.size()] + " ";
  return out;
}

}  // namespace

TEST_CASE("find_json_object recovers an object wrapped in prose and fences") {
  std::mt19937 rng(5);
  for (int t = 0; t < 500; ++t) {
    json obj = json::object();
    for (std::size_t i = 1 + rng() % 4; i > 0; --i) obj["k" + std::to_string(i)] = random_value(rng, 0);
    const std::string body = rng() % 2 ? obj.dump() : obj.dump(2);
    std::string text = prose(rng);
    const bool fenced = rng() % 2;
    if (fenced) text += "\n```json\n";
    text += body;
    if (fenced) text += "\n```\n";
    text += prose(rng);
    const auto found = find_json_object(text);
    REQUIRE(found.has_value());
    CHECK(*found == obj);
  }
}

TEST_CASE("find_json_object edge cases") {
  CHECK_FALSE(find_json_object("").has_value());
  CHECK_FALSE(find_json_object("no json here").has_value());
  CHECK_FALSE(find_json_object("{ unbalanced").has_value());
  CHECK_FALSE(find_json_object("[1, 2, 3]").has_value());
  CHECK(*find_json_object("{not json} then {\"a\": 1}") == json{{"a", 1}});
  CHECK(*find_json_object("{\"a\": \"}\"} {\"b\": 2}") == json{{"a", "}"}});
  CHECK(*find_json_object("{\"outer\": {\"inner\": 1}}") == json{{"outer", {{"inner", 1}}}});

  std::mt19937 rng(9);
  const std::string alphabet = "{}[]\":,\\ abc01\n`";
  for (int t = 0; t < 2000; ++t) {
    std::string junk;
    for (std::size_t i = rng() % 40; i > 0; --i) junk += alphabet[rng() % alphabet.size()];
    const auto found = find_json_object(junk);
    if (found) CHECK(found->is_object());
  }
}

TEST_CASE("refusal phrases") {
  CHECK(contains_refusal_phrase("I'm sorry, I can't help with that"));
  CHECK(contains_refusal_phrase("I\xE2\x80\x99m sorry, but no."));
  CHECK(contains_refusal_phrase("I AM UNABLE TO assist with this request"));
  CHECK_FALSE(contains_refusal_phrase("The Date: 28/05/2022"));
  CHECK_FALSE(contains_refusal_phrase(""));
}

TEST_CASE("call_llm happy path and refusals") {
  StubLlmClient ok(json{{"default", {{{"text", "Result:\n{\"Date\": \"28/05/2022\"}"}}}}});
  const auto good = call_llm(request(), ok, {}, [](auto) {});
  CHECK_FALSE(good.refusal);
  REQUIRE(good.parsed_json.has_value());
  CHECK((*good.parsed_json)["Date"] == "28/05/2022");
  CHECK(good.attempts == 1);

  StubLlmClient sorry(json{{"default", {{{"text", "I'm sorry, I can't help with that"}}}}});
  const auto refused = call_llm(request(), sorry, {}, [](auto) {});
  CHECK(refused.refusal);
  CHECK_FALSE(refused.parsed_json.has_value());
  CHECK(refused.raw_text == "I'm sorry, I can't help with that");

  StubLlmClient filtered(json{{"default", {{{"text", "{\"a\": 1}"}, {"finish_reason", "content_filter"}}}}});
  const auto blocked = call_llm(request(), filtered, {}, [](auto) {});
  CHECK(blocked.refusal);
  CHECK_FALSE(blocked.parsed_json.has_value());

  StubLlmClient prose_only(json{{"default", {{{"text", "The video seems authentic."}}}}});
  const auto unparsed = call_llm(request(), prose_only, {}, [](auto) {});
  CHECK_FALSE(unparsed.refusal);
  CHECK_FALSE(unparsed.parsed_json.has_value());
}

TEST_CASE("call_llm retries and gives up") {
  std::vector<std::chrono::milliseconds> slept;
  const Sleeper record = [&](std::chrono::milliseconds d) { slept.push_back(d); };

  StubLlmClient flaky(json{{"default", {{{"error", "rate_limit"}}, {{"error", "transport"}}, {{"text", "{}"}}}}});
  const auto r = call_llm(request(), flaky, {}, record);
  CHECK(r.attempts == 3);
  CHECK(flaky.calls() == 3);
  CHECK(slept == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000)});

  StubLlmClient down(json{{"default", {{{"error", "transport"}}}}});
  try {
    call_llm(request(), down, {}, record);
    FAIL("expected ExhaustedRetries");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ExhaustedRetries);
  }
  CHECK(down.calls() == 3);

  StubLlmClient denied(json{{"default", {{{"error", "auth"}}}}});
  try {
    call_llm(request(), denied, {}, record);
    FAIL("expected AuthError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AuthError);
  }
  CHECK(denied.calls() == 1);
}

TEST_CASE("stub lookup order and request hashing") {
  const LlmRequest a = request("cross_validation");
  LlmRequest b = a;
  b.images[0].base64 = "QUJE";
  CHECK(request_hash(a) == request_hash(request("forensic")));
  CHECK(request_hash(a) != request_hash(b));
  CHECK(request_hash(a).size() == 64);

  json fx;
  fx["by_hash"][request_hash(b)] = {{{"text", "hash"}}};
  fx["by_purpose"]["cross_validation"] = {{{"text", "purpose-1"}}, {{"text", "purpose-2"}}};
  fx["default"] = {{{"text", "default"}}};
  StubLlmClient stub(fx);
  CHECK(stub.complete(b).text == "hash");
  CHECK(stub.complete(a).text == "purpose-1");
  CHECK(stub.complete(a).text == "purpose-2");
  CHECK(stub.complete(a).text == "purpose-2");
  CHECK(stub.complete(request("forensic")).text == "default");
  CHECK(stub.requests().size() == 5);

  StubLlmClient empty(json::object());
  CHECK_THROWS_AS(empty.complete(a), Error);
}

TEST_CASE("HTTP client request body and response handling") {
  auto transport = std::make_shared<testing::FakeTransport>();
  HttpLlmClient client(transport, "https://api.openai.com/v1/chat/completions", "sk-test", "gpt-4o");

  const json body = client.request_body(request());
  CHECK(body["model"] == "gpt-4o");
  CHECK(body["temperature"] == 0);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == "You are a fact checker.");
  const json& content = body["messages"][1]["content"];
  REQUIRE(content.size() == 2);
  CHECK(content[0] == json{{"type", "text"}, {"text", "Check this."}});
  CHECK(content[1]["image_url"]["url"] == "data:image/jpeg;base64,QUJD");

  transport->push(200, R"({"choices": [{"message": {"content": "{\"x\": 1}"}, "finish_reason": "stop"}],
                           "usage": {"prompt_tokens": 12, "completion_tokens": 3}})");
  const LlmReply reply = client.complete(request());
  CHECK(reply.text == "{\"x\": 1}");
  CHECK(reply.usage.prompt_tokens == 12);
  CHECK(reply.usage.completion_tokens == 3);
  CHECK_FALSE(reply.content_filter);
  const HttpRequest& sent = transport->requests.at(0);
  CHECK(sent.method == "POST");
  CHECK(sent.url == "https://api.openai.com/v1/chat/completions");
  CHECK(json::parse(sent.body) == body);
  bool bearer = false;
  for (const auto& [k, v] : sent.headers) bearer = bearer || (k == "Authorization" && v == "Bearer sk-test");
  CHECK(bearer);

  transport->push(400, R"({"error": {"code": "content_filter"}})");
  CHECK(client.complete(request()).content_filter);
  transport->push(200, R"({"choices": [{"message": {"content": null, "refusal": "no"}, "finish_reason": "stop"}]})");
  CHECK(client.complete(request()).content_filter);

  transport->push(401, "{}");
  CHECK_THROWS_AS(client.complete(request()), Error);
  transport->push(200, R"({"choices": []})");
  try {
    client.complete(request());
    FAIL("expected TransportError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TransportError);
  }

  HttpLlmClient keyless(transport, "https://x", "", "m");
  try {
    keyless.complete(request());
    FAIL("expected AuthError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AuthError);
  }
}

TEST_CASE("rate limiter spaces acquisitions") {
  RateLimiter limiter(std::chrono::milliseconds(1000));
  std::vector<std::chrono::milliseconds> waits;
  const Sleeper record = [&](std::chrono::milliseconds d) { waits.push_back(d); };
  limiter.acquire(record);
  limiter.acquire(record);
  limiter.acquire(record);
  REQUIRE(waits.size() == 2);
  CHECK(waits[0] > std::chrono::milliseconds(900));
  CHECK(waits[1] > std::chrono::milliseconds(1900));
  CHECK(waits[1] <= std::chrono::milliseconds(2000));
}
