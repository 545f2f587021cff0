#include "qpoisson/structure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "qpoisson/kernels.hpp"

namespace qpoisson {

std::size_t SupportGraph::edge_count() const {
    std::size_t total = 0;
    for (const auto& row : adj) total += row.size();
    return total;
}

bool SupportGraph::has_edge(int u, int v) const {
    const auto& row = adj[static_cast<std::size_t>(u)];
    return std::binary_search(row.begin(), row.end(), v);
}

bool SupportGraph::is_subgraph_of(const SupportGraph& other) const {
    if (n != other.n) return false;
    for (int u = 0; u < n; ++u)
        for (int v : adj[static_cast<std::size_t>(u)])
            if (!other.has_edge(u, v)) return false;
    return true;
}

int ChainStructure::peripheral_dim() const {
    return std::accumulate(periods.begin(), periods.end(), 0);
}

int ChainStructure::column_of(int cls, int phase) const {
    int offset = 0;
    for (int i = 0; i < cls; ++i) offset += periods[static_cast<std::size_t>(i)];
    return offset + phase;
}

std::vector<std::pair<int, int>> ChainStructure::index_set() const {
    std::vector<std::pair<int, int>> index;
    for (std::size_t i = 0; i < periods.size(); ++i)
        for (int k = 0; k < periods[i]; ++k) index.emplace_back(static_cast<int>(i), k);
    return index;
}

std::vector<int> ChainStructure::flat_anchors() const {
    std::vector<int> flat;
    for (const auto& row : anchors) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
}

SupportGraph learn_support_graph(const Mrp& mrp, int budget, std::uint64_t seed, int threads) {
    if (budget < 0) throw std::invalid_argument("learn_support_graph: budget must be >= 0");
    SupportGraph g;
    g.n = mrp.size();
    g.adj.resize(static_cast<std::size_t>(g.n));
    kernels::support_sweep(mrp, budget, seed, g.adj, threads);
    return g;
}

SupportGraph exact_support_graph(const StochasticMatrix& p) {
    SupportGraph g;
    g.n = p.size();
    g.adj.resize(static_cast<std::size_t>(g.n));
    for (int s = 0; s < g.n; ++s)
        for (int t = 0; t < g.n; ++t)
            if (p(s, t) > 0.0) g.adj[static_cast<std::size_t>(s)].push_back(t);
    return g;
}

namespace {

// Iterative Tarjan SCC; recursion would overflow on long transient chains.
std::vector<int> strongly_connected_components(const SupportGraph& g, int& comp_count) {
    const int n = g.n;
    constexpr int kUnvisited = -1;
    std::vector<int> index(static_cast<std::size_t>(n), kUnvisited);
    std::vector<int> lowlink(static_cast<std::size_t>(n), 0);
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
    std::vector<int> stack;
    stack.reserve(static_cast<std::size_t>(n));

    struct Frame {
        int v;
        std::size_t next_edge;
    };
    std::vector<Frame> call;
    int next_index = 0;
    comp_count = 0;

    for (int root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != kUnvisited) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            Frame& frame = call.back();
            int v = frame.v;
            if (frame.next_edge == 0) {
                index[static_cast<std::size_t>(v)] = lowlink[static_cast<std::size_t>(v)] = next_index++;
                stack.push_back(v);
                on_stack[static_cast<std::size_t>(v)] = 1;
            }
            const auto& edges = g.adj[static_cast<std::size_t>(v)];
            bool descended = false;
            while (frame.next_edge < edges.size()) {
                int w = edges[frame.next_edge++];
                if (index[static_cast<std::size_t>(w)] == kUnvisited) {
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[static_cast<std::size_t>(w)])
                    lowlink[static_cast<std::size_t>(v)] =
                        std::min(lowlink[static_cast<std::size_t>(v)], index[static_cast<std::size_t>(w)]);
            }
            if (descended) continue;
            if (lowlink[static_cast<std::size_t>(v)] == index[static_cast<std::size_t>(v)]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = 0;
                    comp[static_cast<std::size_t>(w)] = comp_count;
                    if (w == v) break;
                }
                ++comp_count;
            }
            call.pop_back();
            if (!call.empty()) {
                Frame& parent = call.back();
                lowlink[static_cast<std::size_t>(parent.v)] =
                    std::min(lowlink[static_cast<std::size_t>(parent.v)],
                             lowlink[static_cast<std::size_t>(v)]);
            }
        }
    }
    return comp;
}

}  // namespace

ChainStructure analyze_structure(const SupportGraph& g) {
    const int n = g.n;
    for (int s = 0; s < n; ++s)
        if (g.adj[static_cast<std::size_t>(s)].empty())
            throw NumericError("analyze_structure: state " + std::to_string(s) +
                               " has no outgoing edge");

    int comp_count = 0;
    std::vector<int> comp = strongly_connected_components(g, comp_count);

    // A component is closed when no edge leaves it; closed components are the
    // recurrent classes.
    std::vector<char> closed(static_cast<std::size_t>(comp_count), 1);
    for (int u = 0; u < n; ++u)
        for (int v : g.adj[static_cast<std::size_t>(u)])
            if (comp[static_cast<std::size_t>(u)] != comp[static_cast<std::size_t>(v)])
                closed[static_cast<std::size_t>(comp[static_cast<std::size_t>(u)])] = 0;

    std::vector<std::vector<int>> members(static_cast<std::size_t>(comp_count));
    for (int s = 0; s < n; ++s) members[static_cast<std::size_t>(comp[static_cast<std::size_t>(s)])].push_back(s);

    ChainStructure st;
    st.n = n;
    st.cls_of.assign(static_cast<std::size_t>(n), -1);
    st.phase_of.assign(static_cast<std::size_t>(n), -1);

    std::vector<std::vector<int>> recurrent_classes;
    for (int c = 0; c < comp_count; ++c) {
        if (closed[static_cast<std::size_t>(c)])
            recurrent_classes.push_back(members[static_cast<std::size_t>(c)]);  // already sorted
    }
    if (recurrent_classes.empty())
        throw NumericError("analyze_structure: no closed component found");
    std::sort(recurrent_classes.begin(), recurrent_classes.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    std::vector<char> is_recurrent(static_cast<std::size_t>(n), 0);
    for (const auto& cls : recurrent_classes)
        for (int s : cls) is_recurrent[static_cast<std::size_t>(s)] = 1;
    for (int s = 0; s < n; ++s)
        if (!is_recurrent[static_cast<std::size_t>(s)]) st.transient.push_back(s);

    std::vector<char> in_class(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < recurrent_classes.size(); ++i) {
        const auto& cls = recurrent_classes[i];
        const int root = cls.front();
        for (int s : cls) in_class[static_cast<std::size_t>(s)] = 1;

        // BFS levels within the class. Edge u -> v has level defect
        // level(u) + 1 - level(v) >= 0; the gcd of all defects is the period.
        std::vector<long> level(static_cast<std::size_t>(n), -1);
        std::deque<int> queue;
        level[static_cast<std::size_t>(root)] = 0;
        queue.push_back(root);
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            for (int v : g.adj[static_cast<std::size_t>(u)]) {
                if (!in_class[static_cast<std::size_t>(v)]) continue;
                if (level[static_cast<std::size_t>(v)] == -1) {
                    level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                    queue.push_back(v);
                }
            }
        }

        long period = 0;
        for (int u : cls) {
            for (int v : g.adj[static_cast<std::size_t>(u)]) {
                if (!in_class[static_cast<std::size_t>(v)]) continue;
                long defect = level[static_cast<std::size_t>(u)] + 1 - level[static_cast<std::size_t>(v)];
                period = std::gcd(period, defect);
            }
        }
        if (period <= 0)
            throw NumericError("analyze_structure: degenerate period in class " + std::to_string(i));

        const int d = static_cast<int>(period);
        std::vector<std::vector<int>> phases(static_cast<std::size_t>(d));
        for (int s : cls) {
            int k = static_cast<int>(level[static_cast<std::size_t>(s)] % d);
            phases[static_cast<std::size_t>(k)].push_back(s);
            st.cls_of[static_cast<std::size_t>(s)] = static_cast<int>(i);
            st.phase_of[static_cast<std::size_t>(s)] = k;
        }
        std::vector<int> class_anchors;
        for (auto& phase : phases) {
            std::sort(phase.begin(), phase.end());
            class_anchors.push_back(phase.front());
        }

        st.classes.push_back(cls);
        st.periods.push_back(d);
        st.cyclic.push_back(std::move(phases));
        st.anchors.push_back(std::move(class_anchors));
        for (int s : cls) in_class[static_cast<std::size_t>(s)] = 0;
    }
    return st;
}

int required_k(double p_min, int n, double delta) {
    if (!(p_min > 0.0 && p_min <= 1.0))
        throw std::invalid_argument("required_k: p_min must be in (0, 1]");
    if (n < 1) throw std::invalid_argument("required_k: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("required_k: delta must be in (0, 1)");
    double k = std::log(static_cast<double>(n) * n / delta) / p_min;
    return std::max(1, static_cast<int>(std::ceil(k)));
}

double min_positive_probability(const StochasticMatrix& p) {
    double p_min = std::numeric_limits<double>::infinity();
    for (int s = 0; s < p.size(); ++s)
        for (int t = 0; t < p.size(); ++t)
            if (p(s, t) > 0.0) p_min = std::min(p_min, p(s, t));
    return p_min;
}

}  // namespace qpoisson
