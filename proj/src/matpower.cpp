#include "flexagg/matpower.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "flexagg/io.hpp"

namespace flexagg::matpower {

namespace {

struct NumericMatrix {
    std::vector<std::vector<double>> rows;
    int first_line = 0;
};

int line_of(std::string_view text, size_t pos) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
}

double parse_number(std::string_view tok, std::string_view text, size_t pos) {
    double v = 0.0;
    auto first = tok.data();
    auto last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw MalformedMatrix("non-numeric token '" + std::string(tok) + "' at line " +
                              std::to_string(line_of(text, pos)));
    }
    return v;
}

// Extracts `mpc.<name> = [ ... ];` as rows of doubles. Rows end at ';' or
// newline. Returns nothing when the section is absent.
std::optional<NumericMatrix> find_matrix(std::string_view text, const std::string& name) {
    const std::string key = "mpc." + name;
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string_view::npos) {
        size_t after = pos + key.size();
        // must be followed by '=' (allowing spaces), not a longer identifier
        if (after < text.size() &&
            (std::isalnum(static_cast<unsigned char>(text[after])) || text[after] == '_')) {
            pos = after;
            continue;
        }
        size_t eq = text.find_first_not_of(" \t", after);
        if (eq == std::string_view::npos || text[eq] != '=') {
            pos = after;
            continue;
        }
        size_t open = text.find_first_not_of(" \t\r\n", eq + 1);
        if (open == std::string_view::npos || text[open] != '[') {
            pos = after;
            continue;
        }
        size_t close = text.find(']', open);
        if (close == std::string_view::npos) {
            throw MalformedMatrix("unbalanced brackets in mpc." + name + " near line " +
                                  std::to_string(line_of(text, open)));
        }
        NumericMatrix m;
        m.first_line = line_of(text, open);
        std::string_view body = text.substr(open + 1, close - open - 1);
        std::vector<double> row;
        size_t i = 0;
        auto flush_row = [&] {
            if (!row.empty()) {
                m.rows.push_back(row);
                row.clear();
            }
        };
        while (i < body.size()) {
            char ch = body[i];
            if (ch == ';' || ch == '\n') {
                flush_row();
                ++i;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < body.size() && !std::isspace(static_cast<unsigned char>(body[j])) &&
                   body[j] != ';' && body[j] != ',') {
                ++j;
            }
            row.push_back(parse_number(body.substr(i, j - i), text, open + 1 + i));
            i = j;
        }
        flush_row();
        return m;
    }
    return std::nullopt;
}

double column(const std::vector<double>& row, size_t idx1, double fallback = 0.0) {
    return idx1 <= row.size() ? row[idx1 - 1] : fallback;
}

std::optional<double> find_scalar(std::string_view text, const std::string& name) {
    const std::string key = "mpc." + name;
    size_t pos = text.find(key);
    if (pos == std::string_view::npos) return std::nullopt;
    size_t eq = text.find('=', pos);
    if (eq == std::string_view::npos) return std::nullopt;
    size_t start = text.find_first_not_of(" \t", eq + 1);
    size_t end = text.find_first_of("; \t\r\n", start);
    if (end == std::string_view::npos) end = text.size();
    return parse_number(text.substr(start, end - start), text, start);
}

}  // namespace

RawCase parse_case(std::string_view raw_text) {
    // Remove comments first so '%' never reaches the tokenizer.
    std::string cleaned;
    cleaned.reserve(raw_text.size());
    {
        bool in_comment = false;
        for (char ch : raw_text) {
            if (ch == '%') in_comment = true;
            if (ch == '\n') in_comment = false;
            cleaned.push_back(in_comment ? (ch == '\n' ? '\n' : ' ') : ch);
        }
    }
    std::string_view text = cleaned;

    RawCase c;
    {
        size_t fpos = text.find("function mpc =");
        if (fpos != std::string_view::npos) {
            size_t start = fpos + std::string("function mpc =").size();
            size_t b = text.find_first_not_of(" \t", start);
            size_t e = text.find_first_of(" \t\r\n", b);
            if (b != std::string_view::npos) c.name = std::string(text.substr(b, e - b));
        }
    }

    auto base = find_scalar(text, "baseMVA");
    if (!base) throw MissingSection("mpc.baseMVA not found");
    c.base_mva = *base;
    if (!(c.base_mva > 0)) throw MalformedMatrix("baseMVA must be positive");

    auto bus = find_matrix(text, "bus");
    if (!bus) throw MissingSection("mpc.bus not found");
    for (size_t i = 0; i < bus->rows.size(); ++i) {
        const auto& r = bus->rows[i];
        if (r.size() < 4) {
            throw MalformedMatrix("bus row " + std::to_string(i + 1) + " has " +
                                  std::to_string(r.size()) + " columns, need >= 4");
        }
        BusRow b;
        b.bus_id = static_cast<int>(column(r, 1));
        b.type_code = static_cast<int>(column(r, 2));
        b.pd_mw = column(r, 3);
        b.qd_mvar = column(r, 4);
        b.vmax_pu = column(r, 12);
        b.vmin_pu = column(r, 13);
        if (column(r, 5) != 0.0 || column(r, 6) != 0.0) {
            c.warnings.push_back("bus " + std::to_string(b.bus_id) +
                                 ": nonzero shunt (Gs/Bs) ignored");
        }
        c.bus_rows.push_back(b);
    }

    auto branch = find_matrix(text, "branch");
    if (!branch) throw MissingSection("mpc.branch not found");
    for (size_t i = 0; i < branch->rows.size(); ++i) {
        const auto& r = branch->rows[i];
        if (r.size() < 4) {
            throw MalformedMatrix("branch row " + std::to_string(i + 1) + " too short");
        }
        BranchRow b;
        b.from_bus = static_cast<int>(column(r, 1));
        b.to_bus = static_cast<int>(column(r, 2));
        b.r_pu = column(r, 3);
        b.x_pu = column(r, 4);
        b.status = static_cast<int>(column(r, 11, 1.0));
        if (column(r, 9) != 0.0) {
            c.warnings.push_back("branch " + std::to_string(b.from_bus) + "-" +
                                 std::to_string(b.to_bus) + ": off-nominal tap ignored");
        }
        c.branch_rows.push_back(b);
    }

    if (auto gen = find_matrix(text, "gen")) {
        for (const auto& r : gen->rows) {
            GenRow g;
            g.bus_id = static_cast<int>(column(r, 1));
            g.qmax_mvar = column(r, 4);
            g.qmin_mvar = column(r, 5);
            g.pmax_mw = column(r, 9);
            g.pmin_mw = column(r, 10);
            c.gen_rows.push_back(g);
        }
    }

    if (auto gc = find_matrix(text, "gencost")) {
        for (size_t i = 0; i < gc->rows.size(); ++i) {
            const auto& r = gc->rows[i];
            GenCostRow g;
            g.model_code = static_cast<int>(column(r, 1));
            if (g.model_code == 2) {
                int n = static_cast<int>(column(r, 4));
                if (n > 3 || r.size() < 4 + static_cast<size_t>(n)) {
                    throw MalformedMatrix("gencost row " + std::to_string(i + 1) +
                                          ": unsupported polynomial of degree " +
                                          std::to_string(n - 1));
                }
                double coeff[3] = {0, 0, 0};  // c2, c1, c0
                for (int k = 0; k < n; ++k) coeff[3 - n + k] = r[4 + k];
                g.c2 = coeff[0];
                g.c1 = coeff[1];
                g.c0 = coeff[2];
            }
            c.gencost_rows.push_back(g);
        }
    }

    if (!c.gen_rows.empty() && !c.gencost_rows.empty() &&
        c.gen_rows.size() != c.gencost_rows.size()) {
        throw MalformedMatrix("gen and gencost row counts differ (" +
                              std::to_string(c.gen_rows.size()) + " vs " +
                              std::to_string(c.gencost_rows.size()) + ")");
    }

    // Referential integrity of branch endpoints.
    for (const auto& b : c.branch_rows) {
        auto exists = [&](int id) {
            return std::any_of(c.bus_rows.begin(), c.bus_rows.end(),
                               [&](const BusRow& r) { return r.bus_id == id; });
        };
        if (!exists(b.from_bus) || !exists(b.to_bus)) {
            throw MalformedMatrix("branch " + std::to_string(b.from_bus) + "-" +
                                  std::to_string(b.to_bus) + " references unknown bus");
        }
    }
    return c;
}

RawCase load_case(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open case file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    RawCase c = parse_case(ss.str());
    if (c.name.empty()) {
        auto slash = path.find_last_of('/');
        auto base = path.substr(slash == std::string::npos ? 0 : slash + 1);
        auto dot = base.find_last_of('.');
        c.name = base.substr(0, dot);
    }
    return c;
}

std::string serialize_case(const RawCase& c) {
    std::ostringstream out;
    auto num = [](double v) { return io::format_double(v); };
    out << "function mpc = " << (c.name.empty() ? "mpc_case" : c.name) << "\n";
    out << "mpc.version = '2';\n";
    out << "mpc.baseMVA = " << num(c.base_mva) << ";\n";
    out << "mpc.bus = [\n";
    for (const auto& b : c.bus_rows) {
        out << "\t" << b.bus_id << "\t" << b.type_code << "\t" << num(b.pd_mw) << "\t"
            << num(b.qd_mvar) << "\t0\t0\t1\t1\t0\t0\t1\t" << num(b.vmax_pu) << "\t"
            << num(b.vmin_pu) << ";\n";
    }
    out << "];\n";
    out << "mpc.gen = [\n";
    for (const auto& g : c.gen_rows) {
        out << "\t" << g.bus_id << "\t0\t0\t" << num(g.qmax_mvar) << "\t" << num(g.qmin_mvar)
            << "\t1\t" << num(c.base_mva) << "\t1\t" << num(g.pmax_mw) << "\t"
            << num(g.pmin_mw) << "\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;\n";
    }
    out << "];\n";
    out << "mpc.branch = [\n";
    for (const auto& b : c.branch_rows) {
        out << "\t" << b.from_bus << "\t" << b.to_bus << "\t" << num(b.r_pu) << "\t"
            << num(b.x_pu) << "\t0\t0\t0\t0\t0\t0\t" << b.status << "\t-360\t360;\n";
    }
    out << "];\n";
    out << "mpc.gencost = [\n";
    for (const auto& g : c.gencost_rows) {
        out << "\t" << g.model_code << "\t0\t0\t3\t" << num(g.c2) << "\t" << num(g.c1)
            << "\t" << num(g.c0) << ";\n";
    }
    out << "];\n";
    return out.str();
}

RadialNetwork to_radial_network(const RawCase& c, const DerSizing& sizing) {
    const int n = static_cast<int>(c.bus_rows.size());
    if (n == 0) throw MalformedMatrix("case has no buses");

    std::map<int, int> id_to_raw;  // file bus id -> row position
    for (int i = 0; i < n; ++i) id_to_raw[c.bus_rows[i].bus_id] = i;

    // Root: the unique type-3 bus, else fall back below.
    int root_raw = -1;
    for (int i = 0; i < n; ++i) {
        if (c.bus_rows[i].type_code == 3) {
            if (root_raw >= 0) throw NotRadial("multiple slack (type 3) buses");
            root_raw = i;
        }
    }

    // Active branches as adjacency on raw positions.
    struct Edge {
        int a, b;
        double r, x;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj(n);
    for (const auto& br : c.branch_rows) {
        if (br.status == 0) continue;
        Edge e{id_to_raw.at(br.from_bus), id_to_raw.at(br.to_bus), br.r_pu, br.x_pu};
        adj[e.a].push_back(static_cast<int>(edges.size()));
        adj[e.b].push_back(static_cast<int>(edges.size()));
        edges.push_back(e);
    }

    if (root_raw < 0) {
        // fall back: a bus that never appears as a 'to' endpoint
        std::vector<bool> is_to(n, false);
        for (const auto& e : edges) is_to[e.b] = true;
        for (int i = 0; i < n; ++i) {
            if (!is_to[i]) {
                if (root_raw >= 0) throw NotRadial("cannot identify a unique root bus");
                root_raw = i;
            }
        }
        if (root_raw < 0) throw NotRadial("no root bus (type 3) and every bus has a parent");
    }

    if (static_cast<int>(edges.size()) != n - 1) {
        throw NotRadial("bus/line count mismatch: " + std::to_string(n) + " buses, " +
                        std::to_string(edges.size()) + " active branches");
    }

    // BFS relabel from the root; parent-before-child by construction.
    std::vector<int> raw_to_new(n, -1);
    std::vector<int> order;  // raw positions in BFS order
    std::vector<int> depth(n, 0);
    order.push_back(root_raw);
    raw_to_new[root_raw] = 0;
    RadialNetwork net;
    std::vector<bool> edge_used(edges.size(), false);
    for (size_t head = 0; head < order.size(); ++head) {
        int cur = order[head];
        for (int ei : adj[cur]) {
            if (edge_used[ei]) continue;
            const Edge& e = edges[ei];
            int other = (e.a == cur) ? e.b : e.a;
            if (raw_to_new[other] != -1) {
                throw NotRadial("cycle through bus " + std::to_string(c.bus_rows[other].bus_id));
            }
            edge_used[ei] = true;
            raw_to_new[other] = static_cast<int>(order.size());
            depth[other] = depth[cur] + 1;
            order.push_back(other);
            net.branches.push_back({raw_to_new[cur], raw_to_new[other], e.r, e.x});
        }
    }
    if (static_cast<int>(order.size()) != n) {
        std::string missing;
        for (int i = 0; i < n; ++i) {
            if (raw_to_new[i] == -1) missing += " " + std::to_string(c.bus_rows[i].bus_id);
        }
        throw NotRadial("disconnected buses:" + missing);
    }

    net.name = c.name;
    net.base_mva = c.base_mva;
    net.n_bus = n;
    net.demand_p = Vec::Zero(n);
    net.demand_q = Vec::Zero(n);
    net.u_min = Vec::Zero(n);
    net.u_max = Vec::Zero(n);
    net.orig_bus_id.resize(n);
    for (int raw = 0; raw < n; ++raw) {
        const BusRow& b = c.bus_rows[raw];
        int i = raw_to_new[raw];
        net.orig_bus_id[i] = b.bus_id;
        net.demand_p[i] = b.pd_mw / c.base_mva;
        net.demand_q[i] = b.qd_mvar / c.base_mva;
        double vmin = b.vmin_pu > 0 ? b.vmin_pu : 0.9;
        double vmax = b.vmax_pu > 0 ? b.vmax_pu : 1.1;
        net.u_min[i] = vmin * vmin;
        net.u_max[i] = vmax * vmax;
    }
    // The root voltage is pinned to 1; its band must admit that.
    if (net.u_min[0] > 1.0 || net.u_max[0] < 1.0) {
        net.warnings.push_back("PCC voltage band widened to include 1 p.u.");
        net.u_min[0] = std::min(net.u_min[0], 1.0);
        net.u_max[0] = std::max(net.u_max[0], 1.0);
    }

    // DER at the deepest leaf (lowest original bus id on ties).
    std::vector<bool> has_child(n, false);
    for (const auto& br : net.branches) has_child[br.from] = true;
    int der_bus = -1;
    int best_depth = -1;
    int best_id = 0;
    for (int raw = 0; raw < n; ++raw) {
        int i = raw_to_new[raw];
        if (i == 0 || has_child[i]) continue;
        int d = depth[raw];
        int id = c.bus_rows[raw].bus_id;
        if (d > best_depth || (d == best_depth && id < best_id)) {
            best_depth = d;
            best_id = id;
            der_bus = i;
        }
    }
    if (der_bus < 0) throw NoLeaf("single-bus case has no leaf for DER placement");

    const double total_p = net.demand_p.sum();
    const double total_q = net.demand_q.sum();
    net.der.bus = der_bus;
    net.der.p = {-sizing.fraction_p * total_p, sizing.fraction_p * total_p};
    net.der.q = {-sizing.fraction_q * total_q, sizing.fraction_q * total_q};
    net.der.cost = {};

    // Wide defaults; the case format carries no PCC exchange limits.
    net.pcc_p = {-2.0 * total_p, 2.0 * total_p};
    net.pcc_q = {-2.0 * total_q, 2.0 * total_q};
    net.warnings.insert(net.warnings.end(), c.warnings.begin(), c.warnings.end());
    return net;
}

}  // namespace flexagg::matpower
