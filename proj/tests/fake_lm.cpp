// Stand-in for an out-of-process language model. Usage: fake_lm V [mode]
//   mode "chain" (default): p(v | last) puts extra mass on (last + 1) mod V
//   mode "short": replies with V - 1 log-probabilities
//   mode "unnormalized": log-probabilities of a distribution summing to 2
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

int main(int argc, char** argv) {
  if (argc < 2) return 2;
  const int v = std::atoi(argv[1]);
  const std::string mode = argc > 2 ? argv[2] : "chain";
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto req = nlohmann::json::parse(line);
    if (req.at("op") == "info") {
      std::cout << nlohmann::json{{"vocab_size", v}}.dump() << std::endl;
      continue;
    }
    const auto prefix = req.at("prefix").get<std::vector<int>>();
    const int last = prefix.empty() ? -1 : prefix.back();
    std::vector<double> p(static_cast<std::size_t>(v), 1.0);
    if (last >= 0) p[static_cast<std::size_t>((last + 1) % v)] += 3.0;
    double sum = 0;
    for (double x : p) sum += x;
    std::vector<double> lp;
    for (double x : p) lp.push_back(std::log(x / sum * (mode == "unnormalized" ? 2.0 : 1.0)));
    if (mode == "short") lp.pop_back();
    std::cout << nlohmann::json{{"logprobs", lp}}.dump() << std::endl;
  }
  return 0;
}
