#include "abmscope/emachine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include <boost/math/special_functions/gamma.hpp>

#include "abmscope/error.hpp"

namespace abmscope::emachine {

using symbolic::SymbolSequence;

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr std::size_t kMaxTableSize = std::size_t{1} << 26;

std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (base != 0 && r > std::numeric_limits<std::size_t>::max() / base)
            return std::numeric_limits<std::size_t>::max();
        r *= base;
    }
    return r;
}

double entropy_bits(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log2(x);
    return h;
}

// Two-sample chi-squared test of homogeneity on two count vectors.
// Returns the p-value; columns empty in both samples are ignored.
double homogeneity_p(std::span<const double> a, std::span<const double> b) {
    const double na = std::accumulate(a.begin(), a.end(), 0.0);
    const double nb = std::accumulate(b.begin(), b.end(), 0.0);
    if (na <= 0.0 || nb <= 0.0) return 1.0;
    const double total = na + nb;
    double stat = 0.0;
    int cols = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double col = a[j] + b[j];
        if (col <= 0.0) continue;
        ++cols;
        const double ea = na * col / total;
        const double eb = nb * col / total;
        stat += (a[j] - ea) * (a[j] - ea) / ea + (b[j] - eb) * (b[j] - eb) / eb;
    }
    if (cols <= 1) return 1.0;
    const int df = cols - 1;
    return boost::math::gamma_q(0.5 * df, 0.5 * stat);
}

// Next-symbol counts for every history of length 0..L, pooled over sequences.
// counts[l][code * A + next]; a history's code has the most recent symbol
// as the least significant base-A digit.
struct HistoryCounts {
    std::size_t alphabet = 0;
    std::size_t max_length = 0;
    std::vector<std::vector<double>> counts;

    double total(std::size_t l, std::size_t code) const {
        const double* row = &counts[l][code * alphabet];
        return std::accumulate(row, row + alphabet, 0.0);
    }
    std::span<const double> row(std::size_t l, std::size_t code) const {
        return {&counts[l][code * alphabet], alphabet};
    }
};

HistoryCounts count_histories(std::span<const SymbolSequence> seqs, std::size_t alphabet, std::size_t max_length) {
    HistoryCounts hc;
    hc.alphabet = alphabet;
    hc.max_length = max_length;
    hc.counts.resize(max_length + 1);
    for (std::size_t l = 0; l <= max_length; ++l) hc.counts[l].assign(ipow(alphabet, l) * alphabet, 0.0);
    for (const auto& seq : seqs) {
        const auto& s = seq.symbols;
        for (std::size_t l = 0; l <= max_length; ++l) {
            const std::size_t modulus = ipow(alphabet, l);
            std::size_t code = 0;
            for (std::size_t t = 0; t < s.size(); ++t) {
                if (t >= l) hc.counts[l][code * alphabet + s[t]] += 1.0;
                if (l > 0) code = (code * alphabet + s[t]) % modulus;
            }
        }
    }
    return hc;
}

struct HistoryKey {
    std::size_t length;
    std::size_t code;
    bool operator<(const HistoryKey& o) const { return std::tie(length, code) < std::tie(o.length, o.code); }
    bool operator==(const HistoryKey& o) const = default;
};

struct WorkState {
    std::vector<HistoryKey> histories;
    std::vector<double> counts;
};

class Reconstructor {
public:
    Reconstructor(const HistoryCounts& hc, double significance) : hc_(hc), alpha_(significance) {
        owner_.resize(hc.max_length + 1);
        for (std::size_t l = 0; l <= hc.max_length; ++l) owner_[l].assign(ipow(hc.alphabet, l), kNone);
    }

    EpsilonMachine run() {
        homogenize();
        keep_longest_histories();
        determinize();
        return assemble();
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    void add(std::size_t state, HistoryKey h) {
        auto& st = states_[state];
        st.histories.push_back(h);
        const auto r = hc_.row(h.length, h.code);
        for (std::size_t a = 0; a < hc_.alphabet; ++a) st.counts[a] += r[a];
        owner_[h.length][h.code] = state;
    }

    std::size_t new_state() {
        states_.push_back(WorkState{{}, std::vector<double>(hc_.alphabet, 0.0)});
        return states_.size() - 1;
    }

    void homogenize() {
        const std::size_t A = hc_.alphabet;
        add(new_state(), {0, 0});
        for (std::size_t l = 0; l < hc_.max_length; ++l) {
            const std::size_t n_codes = ipow(A, l);
            const std::size_t weight = n_codes; // A^l: digit position of the prepended, older symbol
            for (std::size_t code = 0; code < n_codes; ++code) {
                const std::size_t parent = owner_[l][code];
                if (parent == kNone) continue;
                for (std::size_t a = 0; a < A; ++a) {
                    const HistoryKey child{l + 1, code + a * weight};
                    if (hc_.total(child.length, child.code) <= 0.0) continue;
                    const auto row = hc_.row(child.length, child.code);
                    if (homogeneity_p(row, states_[parent].counts) >= alpha_) {
                        add(parent, child);
                        continue;
                    }
                    std::size_t best = kNone;
                    double best_p = -1.0;
                    for (std::size_t s = 0; s < states_.size(); ++s) {
                        if (s == parent) continue;
                        const double p = homogeneity_p(row, states_[s].counts);
                        if (p >= alpha_ && p > best_p) {
                            best = s;
                            best_p = p;
                        }
                    }
                    add(best == kNone ? new_state() : best, child);
                }
            }
        }
    }

    void rebuild_state_counts(WorkState& st) const {
        std::fill(st.counts.begin(), st.counts.end(), 0.0);
        for (const auto& h : st.histories) {
            const auto r = hc_.row(h.length, h.code);
            for (std::size_t a = 0; a < hc_.alphabet; ++a) st.counts[a] += r[a];
        }
    }

    void reindex_owners() {
        for (auto& v : owner_) std::fill(v.begin(), v.end(), kNone);
        for (std::size_t s = 0; s < states_.size(); ++s)
            for (const auto& h : states_[s].histories) owner_[h.length][h.code] = s;
    }

    // Only full-length histories take part in the transition structure.
    void keep_longest_histories() {
        std::vector<WorkState> kept;
        for (auto& st : states_) {
            std::erase_if(st.histories, [&](const HistoryKey& h) { return h.length != hc_.max_length; });
            if (st.histories.empty()) continue;
            rebuild_state_counts(st);
            kept.push_back(std::move(st));
        }
        states_ = std::move(kept);
        reindex_owners();
    }

    std::size_t successor_code(std::size_t code, std::size_t symbol) const {
        return (code * hc_.alphabet + symbol) % ipow(hc_.alphabet, hc_.max_length);
    }

    // Owner of the successor history, or kNone if xb was never observed or its
    // suffix never appeared as a history with a following symbol.
    std::size_t successor_state(const HistoryKey& h, std::size_t symbol) const {
        if (hc_.row(h.length, h.code)[symbol] <= 0.0) return kNone;
        return owner_[hc_.max_length][successor_code(h.code, symbol)];
    }

    void determinize() {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t s = 0; s < states_.size() && !changed; ++s) {
                for (std::size_t b = 0; b < hc_.alphabet && !changed; ++b) {
                    std::vector<std::size_t> group_target;
                    std::vector<std::vector<HistoryKey>> groups;
                    std::vector<HistoryKey> unconstrained;
                    for (const auto& h : states_[s].histories) {
                        const std::size_t target = successor_state(h, b);
                        if (target == kNone) {
                            unconstrained.push_back(h);
                            continue;
                        }
                        auto it = std::find(group_target.begin(), group_target.end(), target);
                        if (it == group_target.end()) {
                            group_target.push_back(target);
                            groups.push_back({h});
                        } else {
                            groups[static_cast<std::size_t>(it - group_target.begin())].push_back(h);
                        }
                    }
                    if (groups.size() <= 1) continue;
                    // First group (and histories without a b-successor) stay; the rest split off.
                    auto& keep = groups.front();
                    keep.insert(keep.end(), unconstrained.begin(), unconstrained.end());
                    std::sort(keep.begin(), keep.end());
                    states_[s].histories = keep;
                    rebuild_state_counts(states_[s]);
                    for (std::size_t g = 1; g < groups.size(); ++g) {
                        WorkState st{std::move(groups[g]), std::vector<double>(hc_.alphabet, 0.0)};
                        rebuild_state_counts(st);
                        states_.push_back(std::move(st));
                    }
                    reindex_owners();
                    changed = true;
                }
            }
        }
    }

    EpsilonMachine assemble() const {
        const std::size_t A = hc_.alphabet;
        const std::size_t n = states_.size();
        // successor[s][b] (kNone when b never follows s)
        std::vector<std::vector<std::size_t>> succ(n, std::vector<std::size_t>(A, kNone));
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t b = 0; b < A; ++b)
                for (const auto& h : states_[s].histories) {
                    const std::size_t t = successor_state(h, b);
                    if (t != kNone) {
                        succ[s][b] = t;
                        break;
                    }
                }

        const std::vector<bool> keep = closed_classes(succ);
        std::vector<std::size_t> new_id(n, kNone);
        std::size_t kept = 0;
        for (std::size_t s = 0; s < n; ++s)
            if (keep[s]) new_id[s] = kept++;

        EpsilonMachine m;
        m.n_states = kept;
        m.alphabet_size = A;
        m.history_length = hc_.max_length;
        m.pruned_transient = n - kept;
        if (m.pruned_transient > 0)
            m.warnings.push_back("pruned " + std::to_string(m.pruned_transient) + " transient state(s)");
        for (std::size_t s = 0; s < n; ++s) {
            if (!keep[s]) continue;
            // Emission probabilities only count symbols whose successor is known,
            // so every retained state's row sums to one.
            double total = 0.0;
            for (std::size_t b = 0; b < A; ++b)
                if (succ[s][b] != kNone) total += states_[s].counts[b];
            for (std::size_t b = 0; b < A; ++b) {
                if (succ[s][b] == kNone || states_[s].counts[b] <= 0.0) continue;
                m.transitions.push_back({new_id[s], b, new_id[succ[s][b]], states_[s].counts[b] / total});
            }
        }
        m.stationary = stationary_distribution(m);
        return m;
    }

    // Union of closed strongly connected components (recurrent states).
    static std::vector<bool> closed_classes(const std::vector<std::vector<std::size_t>>& succ) {
        const std::size_t n = succ.size();
        // reach[i][j]: j reachable from i (small n, Floyd-Warshall style closure)
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i) {
            reach[i][i] = true;
            for (std::size_t t : succ[i])
                if (t != kNone) reach[i][t] = true;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (reach[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (reach[k][j]) reach[i][j] = true;
        std::vector<bool> keep(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            // i is recurrent iff everything reachable from i can reach i back
            bool recurrent = true;
            for (std::size_t j = 0; j < n && recurrent; ++j)
                if (reach[i][j] && !reach[j][i]) recurrent = false;
            // a state with no outgoing edge at all cannot carry a stationary process
            bool has_out = false;
            for (std::size_t t : succ[i]) has_out = has_out || t != kNone;
            keep[i] = recurrent && has_out;
        }
        return keep;
    }

public:
    static std::vector<double> stationary_distribution(const EpsilonMachine& m) {
        const std::size_t n = m.n_states;
        if (n == 0) return {};
        const Eigen::MatrixXd P = m.state_matrix();
        // Lazy chain (I + P) / 2 has the same fixed point and converges for periodic P.
        Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
        for (int it = 0; it < 100000; ++it) {
            Eigen::RowVectorXd next = 0.5 * (pi + pi * P);
            next /= next.sum();
            const double delta = (next - pi).cwiseAbs().maxCoeff();
            pi = next;
            if (delta < 1e-10) break;
        }
        return {pi.data(), pi.data() + pi.size()};
    }

private:
    const HistoryCounts& hc_;
    double alpha_;
    std::vector<WorkState> states_;
    std::vector<std::vector<std::size_t>> owner_;
};

} // namespace

const Transition* EpsilonMachine::find(std::size_t state, std::size_t symbol) const {
    for (const auto& t : transitions)
        if (t.from == state && t.symbol == symbol) return &t;
    return nullptr;
}

std::vector<double> EpsilonMachine::emission(std::size_t state) const {
    std::vector<double> p(alphabet_size, 0.0);
    for (const auto& t : transitions)
        if (t.from == state) p[t.symbol] += t.prob;
    return p;
}

Eigen::MatrixXd EpsilonMachine::state_matrix() const {
    const auto n = static_cast<Eigen::Index>(n_states);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : transitions)
        P(static_cast<Eigen::Index>(t.from), static_cast<Eigen::Index>(t.to)) += t.prob;
    return P;
}

std::vector<double> order_bic(const SymbolSequence& seq, std::size_t max_order) {
    const std::size_t n = seq.size();
    const std::size_t A = std::max<std::size_t>(seq.alphabet_size, 1);
    if (n <= max_order + 1)
        throw InsufficientDataError("sequence", "order selection up to " + std::to_string(max_order) +
                                                    " needs length >= " + std::to_string(max_order + 2) +
                                                    ", got " + std::to_string(n));
    if (ipow(A, max_order) > kMaxTableSize / A)
        throw ValidationError("max_order", "alphabet^order too large");
    const double n_transitions = static_cast<double>(n - max_order);
    std::vector<double> bic;
    for (std::size_t L = 0; L <= max_order; ++L) {
        const std::size_t modulus = ipow(A, L);
        std::vector<double> counts(modulus * A, 0.0);
        std::size_t code = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (t >= max_order) counts[code * A + seq.symbols[t]] += 1.0;
            if (L > 0) code = (code * A + seq.symbols[t]) % modulus;
        }
        double loglik = 0.0;
        for (std::size_t c = 0; c < modulus; ++c) {
            const double* row = &counts[c * A];
            const double total = std::accumulate(row, row + A, 0.0);
            for (std::size_t a = 0; a < A; ++a)
                if (row[a] > 0.0) loglik += row[a] * std::log(row[a] / total);
        }
        const double k_free = static_cast<double>(modulus) * static_cast<double>(A - 1);
        bic.push_back(-2.0 * loglik + k_free * std::log(n_transitions));
    }
    return bic;
}

std::size_t select_order(const SymbolSequence& seq, std::size_t max_order) {
    const auto bic = order_bic(seq, max_order);
    std::size_t best = 0;
    for (std::size_t L = 1; L < bic.size(); ++L)
        if (bic[L] < bic[best]) best = L;
    return best;
}

std::size_t coverage_requirement(std::size_t alphabet_size, std::size_t history_length) {
    const std::size_t p = ipow(std::max<std::size_t>(alphabet_size, 1), history_length);
    return p > std::numeric_limits<std::size_t>::max() / 50 ? std::numeric_limits<std::size_t>::max() : 50 * p;
}

EpsilonMachine reconstruct(const SymbolSequence& seq, std::size_t history_length, double significance) {
    return reconstruct(std::span<const SymbolSequence>(&seq, 1), history_length, significance);
}

EpsilonMachine reconstruct(std::span<const SymbolSequence> seqs, std::size_t history_length, double significance) {
    if (seqs.empty()) throw ValidationError("sequence", "no sequences given");
    if (history_length < 1) throw ValidationError("history", "history length must be >= 1");
    if (!(significance > 0.0 && significance < 1.0))
        throw ValidationError("significance", "must lie strictly between 0 and 1");
    const std::size_t A = std::max<std::size_t>(seqs.front().alphabet_size, 1);
    std::size_t total = 0;
    for (const auto& s : seqs) {
        if (s.alphabet_size != seqs.front().alphabet_size)
            throw ValidationError("sequence", "pooled sequences must share one alphabet");
        total += s.size();
    }
    if (ipow(A, history_length) > kMaxTableSize / A)
        throw ValidationError("history", "alphabet^history too large");
    const std::size_t need = coverage_requirement(A, history_length);
    if (total < need)
        throw InsufficientDataError("sequence", "history length " + std::to_string(history_length) + " over " +
                                                    std::to_string(A) + " symbols needs >= " + std::to_string(need) +
                                                    " symbols, got " + std::to_string(total));
    const HistoryCounts hc = count_histories(seqs, A, history_length);
    Reconstructor r(hc, significance);
    EpsilonMachine m = r.run();
    if (m.n_states == 0)
        throw InsufficientDataError("sequence", "no recurrent causal states could be estimated");
    return m;
}

double entropy_rate(const EpsilonMachine& m) {
    double h = 0.0;
    for (std::size_t s = 0; s < m.n_states; ++s) h += m.stationary[s] * entropy_bits(m.emission(s));
    return std::max(h, 0.0);
}

double statistical_complexity(const EpsilonMachine& m) { return std::max(entropy_bits(m.stationary), 0.0); }

std::vector<double> block_entropies(const SymbolSequence& seq, std::size_t max_block) {
    const std::size_t A = std::max<std::size_t>(seq.alphabet_size, 1);
    const std::size_t n = seq.size();
    if (ipow(A, max_block) > kMaxTableSize) throw ValidationError("max_block", "alphabet^block too large");
    std::vector<double> H(max_block + 1, 0.0);
    for (std::size_t L = 1; L <= max_block; ++L) {
        if (n < L) break;
        const std::size_t modulus = ipow(A, L);
        std::vector<double> counts(modulus, 0.0);
        std::size_t code = 0;
        for (std::size_t t = 0; t < n; ++t) {
            code = (code * A + seq.symbols[t]) % modulus;
            if (t + 1 >= L) counts[code] += 1.0;
        }
        const double windows = static_cast<double>(n - L + 1);
        double h = 0.0;
        for (double c : counts)
            if (c > 0.0) h -= (c / windows) * std::log2(c / windows);
        H[L] = h;
    }
    return H;
}

double excess_entropy(const SymbolSequence& seq, std::size_t max_block) {
    const std::size_t A = std::max<std::size_t>(seq.alphabet_size, 1);
    if (max_block < 1) throw ValidationError("max_block", "must be >= 1");
    const std::size_t p = ipow(A, max_block);
    const std::size_t need = p > std::numeric_limits<std::size_t>::max() / 100 ? p : 100 * p;
    if (seq.size() < need)
        throw InsufficientDataError("sequence", "block length " + std::to_string(max_block) + " needs >= " +
                                                    std::to_string(need) + " symbols, got " +
                                                    std::to_string(seq.size()));
    const auto H = block_entropies(seq, max_block);
    const double h_hat = H[max_block] - H[max_block - 1];
    double e = 0.0;
    for (std::size_t L = 0; L <= max_block; ++L) e = std::max(e, H[L] - static_cast<double>(L) * h_hat);
    return e;
}

bool is_unifilar(const EpsilonMachine& m) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
    for (const auto& t : m.transitions) {
        if (t.from >= m.n_states || t.to >= m.n_states || t.symbol >= m.alphabet_size) return false;
        auto [it, inserted] = seen.emplace(std::make_pair(t.from, t.symbol), t.to);
        if (!inserted) return false;
    }
    return true;
}

double max_row_sum_error(const EpsilonMachine& m) {
    std::vector<double> sums(m.n_states, 0.0);
    for (const auto& t : m.transitions) sums[t.from] += t.prob;
    double err = 0.0;
    for (double s : sums) err = std::max(err, std::abs(s - 1.0));
    return err;
}

double stationary_residual(const EpsilonMachine& m) {
    if (m.n_states == 0) return 0.0;
    const Eigen::Map<const Eigen::RowVectorXd> pi(m.stationary.data(), static_cast<Eigen::Index>(m.stationary.size()));
    return (pi - pi * m.state_matrix()).cwiseAbs().maxCoeff();
}

double min_emission_distance(const EpsilonMachine& m) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.n_states; ++i) {
        const auto a = m.emission(i);
        for (std::size_t j = i + 1; j < m.n_states; ++j) {
            const auto b = m.emission(j);
            double tv = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) tv += std::abs(a[k] - b[k]);
            best = std::min(best, 0.5 * tv);
        }
    }
    return best;
}

StationarityScreen stationarity_screen(const SymbolSequence& seq, double significance) {
    const std::size_t A = std::max<std::size_t>(seq.alphabet_size, 1);
    std::vector<double> first(A, 0.0), second(A, 0.0);
    const std::size_t half = seq.size() / 2;
    for (std::size_t t = 0; t < seq.size(); ++t) (t < half ? first : second)[seq.symbols[t]] += 1.0;
    StationarityScreen s;
    s.p_value = homogeneity_p(first, second);
    s.suspect = s.p_value < significance;
    return s;
}

Analysis analyze(const SymbolSequence& seq, const AnalyzeOptions& opts) {
    if (seq.size() == 0) throw InsufficientDataError("sequence", "empty symbol sequence");
    const std::size_t A = std::max<std::size_t>(seq.alphabet_size, 1);
    const std::size_t n = seq.size();

    // Candidate orders limited to what the coverage rule can reconstruct.
    std::size_t max_order = 0;
    while (max_order < opts.max_order && coverage_requirement(A, max_order + 1) <= n && max_order + 3 <= n)
        ++max_order;

    Analysis out;
    out.selected_order = n > max_order + 1 ? select_order(seq, max_order) : 0;
    const std::size_t history = opts.history_length.value_or(std::max<std::size_t>(1, out.selected_order));
    out.machine = reconstruct(seq, history, opts.significance);

    std::size_t max_block = 0;
    if (opts.max_block) {
        max_block = *opts.max_block;
    } else {
        while (max_block < opts.max_block_cap && 100 * ipow(A, max_block + 1) <= n) ++max_block;
        if (max_block == 0)
            throw InsufficientDataError("sequence", "excess entropy needs >= " + std::to_string(100 * A) +
                                                        " symbols, got " + std::to_string(n));
    }
    out.max_block = max_block;
    out.invariants.entropy_rate = entropy_rate(out.machine);
    out.invariants.statistical_complexity = statistical_complexity(out.machine);
    out.invariants.excess_entropy = excess_entropy(seq, max_block);
    out.stationarity = stationarity_screen(seq, opts.significance);
    if (out.stationarity.suspect)
        out.machine.warnings.push_back("first/second-half symbol histograms differ (p=" +
                                       std::to_string(out.stationarity.p_value) + ")");
    return out;
}

} // namespace abmscope::emachine
