#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "mia/kernels.hpp"
#include "mia/lcs.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

using namespace mia;

namespace {

using Tokens = std::vector<std::string>;

// Exponential reference: longest common subsequence by exhaustive recursion.
std::size_t brute_lcs(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j) {
    if (i == a.size() || j == b.size()) return 0;
    if (a[i] == b[j]) return 1 + brute_lcs(a, i + 1, b, j + 1);
    return std::max(brute_lcs(a, i + 1, b, j), brute_lcs(a, i, b, j + 1));
}

Tokens random_tokens(Rng& rng, std::size_t n, std::size_t alphabet) {
    Tokens t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
    return t;
}

}  // namespace

TEST_CASE("token_lcs on small examples") {
    Tokens a{"the", "cat", "sat", "on", "the", "mat"};
    Tokens b{"the", "dog", "sat", "on", "a", "mat"};
    CHECK(token_lcs(a, b) == 4);
    CHECK(token_lcs(a, Tokens{}) == 0);
    CHECK(token_lcs(a, a) == a.size());
    CHECK(token_lcs(Tokens{"x", "y"}, Tokens{"y", "x"}) == 1);
}

TEST_CASE("text_lcs normalizes case and punctuation") {
    CHECK(text_lcs("The Cat, sat.", "the cat sat") == 3);
    CHECK(text_lcs("alpha beta", "gamma delta") == 0);
}

TEST_CASE("token_lcs matches the exhaustive reference") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = random_tokens(rng, rng.below(9), 3);
        auto b = random_tokens(rng, rng.below(9), 3);
        CHECK(token_lcs(a, b) == brute_lcs(a, 0, b, 0));
    }
}

TEST_CASE("token_lcs invariants") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = random_tokens(rng, rng.below(40), 4);
        auto b = random_tokens(rng, rng.below(40), 4);
        const auto l = token_lcs(a, b);
        CHECK(l == token_lcs(b, a));
        CHECK(l <= std::min(a.size(), b.size()));
        auto longer = b;
        longer.push_back("z");
        CHECK(token_lcs(a, longer) >= l);  // monotone under extension
        CHECK(token_lcs(a, a) == a.size());
    }
}

TEST_CASE("batch_token_lcs parallel path equals serial path") {
    Rng rng(13);
    std::vector<kernels::TokenPair> pairs;
    for (int i = 0; i < 500; ++i) pairs.push_back({random_tokens(rng, 30, 5), random_tokens(rng, 30, 5)});
    auto s = kernels::batch_token_lcs(pairs, kernels::Exec::serial);
    auto p = kernels::batch_token_lcs(pairs, kernels::Exec::parallel);
    CHECK(s == p);
    for (std::size_t i = 0; i < pairs.size(); i += 50) CHECK(s[i] == token_lcs(pairs[i].a, pairs[i].b));
}
