#include "flexagg/network.hpp"

#include <algorithm>
#include <queue>

namespace flexagg {

RadialCheck validate_radial(const RadialNetwork& net) {
    RadialCheck res;
    const int n = net.n_bus;
    const int m = net.n_line();
    if (n == 0) {
        res.connected = false;
        res.message = "empty network";
        return res;
    }
    res.count_ok = (m == n - 1);
    if (!res.count_ok) {
        res.message = "expected " + std::to_string(n - 1) + " branches, found " +
                      std::to_string(m);
    }

    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch index)
    for (int k = 0; k < m; ++k) {
        const Branch& b = net.branches[k];
        if (b.from < 0 || b.from >= n || b.to < 0 || b.to >= n) {
            res.acyclic = false;
            res.message = "branch " + std::to_string(k) + " endpoint out of range";
            return res;
        }
        adj[b.from].push_back({b.to, k});
        adj[b.to].push_back({b.from, k});
    }

    // BFS from the PCC over the undirected graph. A revisit marks a cycle.
    std::vector<int> state(n, 0);  // 0 unseen, 1 reached
    std::vector<bool> used(m, false);
    std::queue<int> q;
    q.push(0);
    state[0] = 1;
    int reached = 1;
    while (!q.empty()) {
        int cur = q.front();
        q.pop();
        for (auto [next, k] : adj[cur]) {
            if (used[k]) continue;
            used[k] = true;
            if (state[next]) {
                res.acyclic = false;
                res.offending_buses.push_back(next);
                continue;
            }
            state[next] = 1;
            ++reached;
            res.branch_order.push_back(k);
            q.push(next);
        }
    }
    if (reached != n) {
        res.connected = false;
        for (int i = 0; i < n; ++i) {
            if (!state[i]) res.offending_buses.push_back(i);
        }
    }
    std::sort(res.offending_buses.begin(), res.offending_buses.end());
    res.offending_buses.erase(
        std::unique(res.offending_buses.begin(), res.offending_buses.end()),
        res.offending_buses.end());

    if (res.message.empty() && !res.ok()) {
        if (!res.connected) {
            res.message = std::to_string(n - reached) + " buses unreachable from the PCC";
        } else if (!res.acyclic) {
            res.message = "cycle detected";
        }
    }
    if (!res.ok()) res.branch_order.clear();
    return res;
}

Incidence build_incidence(const RadialNetwork& net) {
    auto check = validate_radial(net);
    if (!check.ok()) throw NotRadial(check.message);

    const int n = net.n_bus;
    const int m = net.n_line();
    Incidence inc;
    inc.c_from = Mat::Zero(m, n);
    inc.c_to = Mat::Zero(m, n);
    for (int k = 0; k < m; ++k) {
        inc.c_from(k, net.branches[k].from) = 1.0;
        inc.c_to(k, net.branches[k].to) = 1.0;
    }
    inc.c = inc.c_from - inc.c_to;
    inc.c_gen = Mat::Zero(n, 1);
    inc.c_gen(net.der.bus, 0) = 1.0;
    inc.e1 = Vec::Zero(n);
    inc.e1[0] = 1.0;
    return inc;
}

}  // namespace flexagg
