#include "qlink/fock.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace qlink::fock {

namespace {

// Terms are packed into 64 bits: one byte per photon (sorted ascending from
// the low byte), empty slots filled with 0xFF. Bounds: at most 8 photons,
// mode ids at most 254.
constexpr int kMaxPhotons = 8;
constexpr std::uint64_t kEmptyKey = ~0ull;

using Key = std::uint64_t;

int key_size(Key k) {
  int n = 0;
  while (n < kMaxPhotons && ((k >> (8 * n)) & 0xff) != 0xff) ++n;
  return n;
}

Key pack(const Photons& photons) {
  if (photons.size() > kMaxPhotons) {
    throw std::invalid_argument("fock terms support at most 8 photons");
  }
  Photons sorted = photons;
  std::sort(sorted.begin(), sorted.end());
  Key k = kEmptyKey;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] > 254) {
      throw std::invalid_argument("fock mode ids must be <= 254");
    }
    k &= ~(0xffull << (8 * i));
    k |= static_cast<Key>(sorted[i]) << (8 * i);
  }
  return k;
}

Photons unpack(Key k) {
  Photons photons;
  for (int i = 0; i < kMaxPhotons; ++i) {
    const auto b = (k >> (8 * i)) & 0xff;
    if (b == 0xff) break;
    photons.push_back(static_cast<Mode>(b));
  }
  return photons;
}

// Inserts one mode into a packed sorted key.
Key key_insert(Key k, Mode mode) {
  const int n = key_size(k);
  if (n >= kMaxPhotons) {
    throw std::invalid_argument("fock terms support at most 8 photons");
  }
  const auto m = static_cast<Key>(mode);
  int pos = 0;
  while (pos < n && ((k >> (8 * pos)) & 0xff) < m) ++pos;
  const Key low_mask = pos == 0 ? 0 : (~0ull >> (8 * (8 - pos)));
  const Key low = k & low_mask;
  const Key high = (k & ~low_mask) << 8;
  return low | (m << (8 * pos)) | high;
}

// Removes `count` photons of `mode`; returns the remaining key.
Key key_remove_all(Key k, Mode mode, int& count) {
  Photons photons = unpack(k);
  count = 0;
  Photons rest;
  for (Mode m : photons) {
    if (m == mode) {
      ++count;
    } else {
      rest.push_back(m);
    }
  }
  Key out = kEmptyKey;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    out &= ~(0xffull << (8 * i));
    out |= static_cast<Key>(rest[i]) << (8 * i);
  }
  return out;
}

void sort_and_combine(std::vector<std::pair<Key, cxd>>& terms) {
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < terms.size();) {
    Key k = terms[i].first;
    cxd amp = terms[i].second;
    std::size_t j = i + 1;
    while (j < terms.size() && terms[j].first == k) {
      amp += terms[j].second;
      ++j;
    }
    terms[out++] = {k, amp};
    i = j;
  }
  terms.resize(out);
}

double key_multiplicity_factor(Key k) {
  double f = 1.0;
  int run = 1;
  for (int i = 1; i <= kMaxPhotons; ++i) {
    const auto cur = i < kMaxPhotons ? ((k >> (8 * i)) & 0xff) : 0xffull;
    const auto prev = (k >> (8 * (i - 1))) & 0xff;
    if (prev == 0xff) break;
    if (cur == prev) {
      ++run;
    } else {
      f *= factorial(run);
      run = 1;
    }
  }
  return f;
}

}  // namespace

double factorial(int n) {
  static const double table[] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320};
  if (n < 0) throw std::invalid_argument("factorial of negative value");
  if (n < static_cast<int>(sizeof(table) / sizeof(table[0]))) return table[n];
  double f = table[8];
  for (int k = 9; k <= n; ++k) f *= k;
  return f;
}

double multiplicity_factor(const Photons& photons) {
  double f = 1.0;
  std::size_t i = 0;
  while (i < photons.size()) {
    std::size_t j = i;
    while (j < photons.size() && photons[j] == photons[i]) ++j;
    f *= factorial(static_cast<int>(j - i));
    i = j;
  }
  return f;
}

struct State::Rep {
  std::vector<std::pair<std::uint64_t, cxd>> terms;
};

State::State() : rep_(std::make_shared<Rep>()) {}

State State::vacuum() {
  State s;
  s.rep_->terms = {{kEmptyKey, cxd(1.0, 0.0)}};
  return s;
}

void State::ensure_unique() {
  if (rep_.use_count() > 1) rep_ = std::make_shared<Rep>(*rep_);
}

void State::add_term(Photons photons, cxd amp) {
  ensure_unique();
  rep_->terms.emplace_back(pack(photons), amp);
  sort_and_combine(rep_->terms);
}

void State::apply_creation(const std::vector<ModeAmp>& superposition) {
  ensure_unique();
  std::vector<std::pair<Key, cxd>> next;
  next.reserve(rep_->terms.size() * superposition.size());
  for (const auto& [key, amp] : rep_->terms) {
    for (const auto& [mode, coeff] : superposition) {
      if (mode > 254) {
        throw std::invalid_argument("fock mode ids must be <= 254");
      }
      next.emplace_back(key_insert(key, mode), amp * coeff);
    }
  }
  sort_and_combine(next);
  rep_->terms = std::move(next);
}

void State::substitute(Mode from, const std::vector<ModeAmp>& image) {
  for (const auto& [mode, amp] : image) {
    (void)amp;
    if (mode == from) {
      throw std::invalid_argument(
          "substitution image may not contain source mode");
    }
    if (mode > 254) {
      throw std::invalid_argument("fock mode ids must be <= 254");
    }
  }
  ensure_unique();
  std::vector<std::pair<Key, cxd>> next;
  next.reserve(rep_->terms.size() * 2);
  std::vector<std::size_t> choice;
  for (const auto& [key, amp] : rep_->terms) {
    int k = 0;
    const Key rest = key_remove_all(key, from, k);
    if (k == 0) {
      next.emplace_back(key, amp);
      continue;
    }
    // Expand each replaced photon independently; the multinomial cross
    // terms emerge from the ordered enumeration and collapse on combine.
    choice.assign(static_cast<std::size_t>(k), 0);
    while (true) {
      cxd c = amp;
      Key p = rest;
      for (std::size_t slot = 0; slot < choice.size(); ++slot) {
        const auto& ma = image[choice[slot]];
        c *= ma.amp;
        p = key_insert(p, ma.mode);
      }
      next.emplace_back(p, c);

      std::size_t slot = 0;
      while (slot < choice.size()) {
        if (++choice[slot] < image.size()) break;
        choice[slot] = 0;
        ++slot;
      }
      if (slot == choice.size()) break;
    }
  }
  sort_and_combine(next);
  rep_->terms = std::move(next);
}

double State::norm2() const {
  double n = 0.0;
  for (const auto& [key, amp] : rep_->terms) {
    n += std::norm(amp) * key_multiplicity_factor(key);
  }
  return n;
}

void State::scale(cxd factor) {
  ensure_unique();
  for (auto& [key, amp] : rep_->terms) amp *= factor;
}

State State::tensor(const State& other) const {
  State out;
  out.rep_->terms.reserve(rep_->terms.size() * other.rep_->terms.size());
  for (const auto& [ka, ca] : rep_->terms) {
    for (const auto& [kb, cb] : other.rep_->terms) {
      Key k = ka;
      for (Mode m : unpack(kb)) k = key_insert(k, m);
      out.rep_->terms.emplace_back(k, ca * cb);
    }
  }
  sort_and_combine(out.rep_->terms);
  return out;
}

std::map<Photons, cxd> State::terms() const {
  std::map<Photons, cxd> out;
  for (const auto& [key, amp] : rep_->terms) out[unpack(key)] = amp;
  return out;
}

std::size_t State::term_count() const { return rep_->terms.size(); }

std::map<Photons, double> State::pattern_probabilities() const {
  std::map<Photons, double> probs;
  for (const auto& [key, amp] : rep_->terms) {
    const double p = std::norm(amp) * key_multiplicity_factor(key);
    if (p > 1e-30) probs[unpack(key)] = p;
  }
  return probs;
}

void State::for_each_pattern(
    const std::function<void(const Photons&, double)>& fn) const {
  for (const auto& [key, amp] : rep_->terms) {
    const double p = std::norm(amp) * key_multiplicity_factor(key);
    if (p > 1e-30) fn(unpack(key), p);
  }
}

}  // namespace qlink::fock
