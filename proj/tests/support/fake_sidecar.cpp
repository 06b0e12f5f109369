// Scripted stand-in for the model sidecar. Speaks the stdio protocol with
// deterministic outputs; --mode picks a misbehaviour:
//   normal            answer everything
//   hang-after=N      answer N requests, then go silent
//   die-after=N       answer N requests, then exit
//   swap              answer the 2nd and 3rd requests in reverse order
//   version-mismatch  reject hello
//   error-embed       fail every embed request
//   silent            never answer, not even hello
// --dim D sets the embedding size (default 8); --bad-dim makes vectors one short.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

std::vector<double> embed_one(const std::string& b64, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (std::size_t i = 0; i < b64.size(); ++i) v[i % v.size()] += static_cast<unsigned char>(b64[i]) / 255.0;
  return v;
}

void emit(const json& reply) {
  std::cout << reply.dump() << "\n" << std::flush;
}

void sleep_forever() {
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "normal";
  int dim = 8;
  bool bad_dim = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--mode=", 0) == 0) mode = a.substr(7);
    else if (a == "--dim" && i + 1 < argc) dim = std::stoi(argv[++i]);
    else if (a == "--bad-dim") bad_dim = true;
  }
  int limit = -1;
  if (mode.rfind("hang-after=", 0) == 0 || mode.rfind("die-after=", 0) == 0) {
    limit = std::stoi(mode.substr(mode.find('=') + 1));
  }
  if (mode == "silent") sleep_forever();

  int answered = 0;
  std::vector<json> held;
  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line, nullptr, false);
    if (req.is_discarded()) continue;
    const auto id = req.value("id", 0);
    const std::string op = req.value("op", "");
    json reply = {{"id", id}, {"ok", true}};
    if (op == "hello") {
      if (mode == "version-mismatch") {
        reply = {{"id", id}, {"ok", false}, {"error", "version_mismatch"}};
      } else {
        reply["body"] = {{"embedding_dim", dim},
                         {"supports_shot_scores", true},
                         {"supports_transcribe", false},
                         {"model_ids", {"fake-vit"}}};
      }
    } else if (op == "embed") {
      if (mode == "error-embed") {
        reply = {{"id", id}, {"ok", false}, {"error", "model_failed"}};
      } else {
        json vectors = json::array();
        for (const auto& img : req["payload"]["images"]) {
          auto v = embed_one(img.get<std::string>(), dim);
          if (bad_dim) v.pop_back();
          vectors.push_back(v);
        }
        reply["body"] = {{"vectors", vectors}};
      }
    } else if (op == "shot_scores") {
      const auto& images = req["payload"]["images"];
      json scores = json::array();
      for (std::size_t i = 1; i < images.size(); ++i) scores.push_back(images[i] == images[i - 1] ? 0.0 : 1.0);
      reply["body"] = {{"scores", scores}};
    } else {
      reply = {{"id", id}, {"ok", false}, {"error", "unknown_op"}};
    }

    if (limit >= 0 && answered >= limit) {
      if (mode.rfind("die-after=", 0) == 0) return 0;
      sleep_forever();
    }
    if (mode == "swap" && (answered == 1 || !held.empty())) {
      held.push_back(reply);
      ++answered;
      if (held.size() == 2) {
        emit(held[1]);
        emit(held[0]);
        held.clear();
        mode = "normal";
      }
      continue;
    }
    emit(reply);
    ++answered;
  }
  return 0;
}
