#include "cfrl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_real(const std::string& s, const std::string& column, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
        return v;
    } catch (const std::exception&) {
        throw ValueError("column '" + column + "' at line " + std::to_string(line_no) +
                         ": cannot parse real value '" + s + "'");
    }
}

long parse_integer(const std::string& s, const std::string& column, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValueError("column '" + column + "' at line " + std::to_string(line_no) +
                         ": cannot parse integer value '" + s + "'");
    }
}

}  // namespace

Eigen::MatrixXd TrajectoryBatch::state_history(int i, int t) const {
    Eigen::MatrixXd hist(t + 1, state_dim);
    for (int s = 0; s <= t; ++s) hist.row(s) = state(i, s).transpose();
    return hist;
}

std::vector<int> TrajectoryBatch::action_history(int i, int t) const {
    std::vector<int> hist(static_cast<std::size_t>(t));
    for (int s = 0; s < t; ++s) hist[static_cast<std::size_t>(s)] = actions(i, s);
    return hist;
}

void TrajectoryBatch::validate() const {
    const int n = num_individuals();
    if (state_dim <= 0 || horizon <= 0)
        throw ShapeError("trajectory batch: horizon and state_dim must be positive");
    if (states.rows() != n || actions.rows() != n || rewards.rows() != n ||
        static_cast<int>(ids.size()) != n)
        throw ShapeError("trajectory batch: leading dimensions disagree");
    if (states.cols() != static_cast<Eigen::Index>(horizon + 1) * state_dim)
        throw ShapeError("trajectory batch: states must have T+1 time blocks");
    if (actions.cols() != horizon || rewards.cols() != horizon)
        throw ShapeError("trajectory batch: actions and rewards must have T columns");
    if (!zs.allFinite() || !states.allFinite() || !rewards.allFinite())
        throw ValueError("trajectory batch: non-finite entries");
    if ((actions.array() < 0).any())
        throw ValueError("trajectory batch: negative action index");
}

TrajectoryBatch read_trajectory_from_csv(const std::string& path,
                                         const std::vector<std::string>& z_labels,
                                         const std::vector<std::string>& state_labels,
                                         const std::string& action_label,
                                         const std::string& reward_label,
                                         const std::string& id_label,
                                         int horizon) {
    if (horizon < 1) throw SizeError("read_trajectory_from_csv: T must be >= 1");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    std::string header_line;
    if (!std::getline(in, header_line) || header_line.empty())
        throw SchemaError("'" + path + "': empty file, expected a header row");
    const std::vector<std::string> header = split_csv_line(header_line);

    auto column_index = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("'" + path + "': missing column '" + name + "'");
        return static_cast<int>(it - header.begin());
    };

    const int id_col = column_index(id_label);
    const int time_col = column_index("time");
    std::vector<int> z_cols, x_cols;
    for (const auto& l : z_labels) z_cols.push_back(column_index(l));
    for (const auto& l : state_labels) x_cols.push_back(column_index(l));
    const int action_col = column_index(action_label);
    const int reward_col = column_index(reward_label);

    const int d_z = static_cast<int>(z_cols.size());
    const int d_x = static_cast<int>(x_cols.size());
    if (d_z < 1 || d_x < 1)
        throw SchemaError("read_trajectory_from_csv: need at least one z and one state column");

    struct Row {
        int time;
        std::vector<std::string> fields;
        std::size_t line_no;
    };
    std::vector<std::string> order;           // ids by first appearance
    std::map<std::string, std::vector<Row>> rows_by_id;

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw SchemaError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        const std::string id = fields[static_cast<std::size_t>(id_col)];
        auto [it, inserted] = rows_by_id.try_emplace(id);
        if (inserted) order.push_back(id);
        int t = static_cast<int>(parse_integer(fields[static_cast<std::size_t>(time_col)], "time", line_no));
        it->second.push_back({t, std::move(fields), line_no});
    }
    if (order.empty()) throw SchemaError("'" + path + "': no data rows");

    const int n = static_cast<int>(order.size());
    TrajectoryBatch batch;
    batch.horizon = horizon;
    batch.state_dim = d_x;
    batch.zs.resize(n, d_z);
    batch.states.resize(n, static_cast<Eigen::Index>(horizon + 1) * d_x);
    batch.actions.resize(n, horizon);
    batch.rewards.resize(n, horizon);
    batch.ids = order;
    batch.z_labels = z_labels;
    batch.state_labels = state_labels;
    batch.action_label = action_label;
    batch.reward_label = reward_label;
    batch.id_label = id_label;

    for (int i = 0; i < n; ++i) {
        auto& rows = rows_by_id[order[static_cast<std::size_t>(i)]];
        if (static_cast<int>(rows.size()) != horizon + 1)
            throw RaggedDataError("individual '" + order[static_cast<std::size_t>(i)] + "' has " +
                                  std::to_string(rows.size()) + " rows, expected " +
                                  std::to_string(horizon + 1));
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.time < b.time; });
        for (int t = 0; t <= horizon; ++t) {
            const Row& row = rows[static_cast<std::size_t>(t)];
            if (row.time != t)
                throw RaggedDataError("individual '" + order[static_cast<std::size_t>(i)] +
                                      "': time indices must run 0.." + std::to_string(horizon) +
                                      ", found " + std::to_string(row.time));
            for (int k = 0; k < d_z; ++k) {
                double z = parse_real(row.fields[static_cast<std::size_t>(z_cols[static_cast<std::size_t>(k)])],
                                      z_labels[static_cast<std::size_t>(k)], row.line_no);
                if (t == 0) {
                    batch.zs(i, k) = z;
                } else if (batch.zs(i, k) != z) {
                    throw ValueError("individual '" + order[static_cast<std::size_t>(i)] +
                                     "': sensitive attribute '" + z_labels[static_cast<std::size_t>(k)] +
                                     "' varies over time (line " + std::to_string(row.line_no) + ")");
                }
            }
            for (int k = 0; k < d_x; ++k) {
                batch.states(i, static_cast<Eigen::Index>(t) * d_x + k) =
                    parse_real(row.fields[static_cast<std::size_t>(x_cols[static_cast<std::size_t>(k)])],
                               state_labels[static_cast<std::size_t>(k)], row.line_no);
            }
            const std::string& a_field = row.fields[static_cast<std::size_t>(action_col)];
            const std::string& r_field = row.fields[static_cast<std::size_t>(reward_col)];
            if (t < horizon) {
                long a = parse_integer(a_field, action_label, row.line_no);
                if (a < 0)
                    throw ValueError("column '" + action_label + "' at line " +
                                     std::to_string(row.line_no) + ": action must be >= 0, got " +
                                     std::to_string(a));
                batch.actions(i, t) = static_cast<int>(a);
                batch.rewards(i, t) = parse_real(r_field, reward_label, row.line_no);
            } else if (!a_field.empty() || !r_field.empty()) {
                throw ValueError("individual '" + order[static_cast<std::size_t>(i)] +
                                 "': terminal row must have empty action and reward (line " +
                                 std::to_string(row.line_no) + ")");
            }
        }
    }
    batch.validate();
    return batch;
}

void write_trajectory_to_csv(const TrajectoryBatch& batch, const std::string& path) {
    batch.validate();
    const int d_z = batch.z_dim();
    const int d_x = batch.state_dim;

    std::vector<std::string> z_labels = batch.z_labels;
    std::vector<std::string> state_labels = batch.state_labels;
    for (int k = static_cast<int>(z_labels.size()); k < d_z; ++k)
        z_labels.push_back("z" + std::to_string(k + 1));
    for (int k = static_cast<int>(state_labels.size()); k < d_x; ++k)
        state_labels.push_back("state" + std::to_string(k + 1));

    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    out << csv_escape(batch.id_label) << ",time";
    for (const auto& l : z_labels) out << ',' << csv_escape(l);
    for (const auto& l : state_labels) out << ',' << csv_escape(l);
    out << ',' << csv_escape(batch.action_label) << ',' << csv_escape(batch.reward_label) << '\n';

    for (int i = 0; i < batch.num_individuals(); ++i) {
        for (int t = 0; t <= batch.horizon; ++t) {
            out << csv_escape(batch.ids[static_cast<std::size_t>(i)]) << ',' << t;
            for (int k = 0; k < d_z; ++k) out << ',' << format_real(batch.zs(i, k));
            for (int k = 0; k < d_x; ++k)
                out << ',' << format_real(batch.states(i, static_cast<Eigen::Index>(t) * d_x + k));
            if (t < batch.horizon) {
                out << ',' << batch.actions(i, t) << ',' << format_real(batch.rewards(i, t));
            } else {
                out << ",,";
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

TrajectoryBatch select_individuals(const TrajectoryBatch& batch, const std::vector<int>& rows) {
    TrajectoryBatch out;
    out.horizon = batch.horizon;
    out.state_dim = batch.state_dim;
    out.z_labels = batch.z_labels;
    out.state_labels = batch.state_labels;
    out.action_label = batch.action_label;
    out.reward_label = batch.reward_label;
    out.id_label = batch.id_label;

    const int n = static_cast<int>(rows.size());
    out.zs.resize(n, batch.zs.cols());
    out.states.resize(n, batch.states.cols());
    out.actions.resize(n, batch.actions.cols());
    out.rewards.resize(n, batch.rewards.cols());
    out.ids.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int src = rows[static_cast<std::size_t>(i)];
        out.zs.row(i) = batch.zs.row(src);
        out.states.row(i) = batch.states.row(src);
        out.actions.row(i) = batch.actions.row(src);
        out.rewards.row(i) = batch.rewards.row(src);
        out.ids[static_cast<std::size_t>(i)] = batch.ids[static_cast<std::size_t>(src)];
    }
    return out;
}

std::pair<TrajectoryBatch, TrajectoryBatch> train_test_split(const TrajectoryBatch& batch,
                                                             double test_fraction,
                                                             std::uint64_t seed) {
    const int n = batch.num_individuals();
    if (n < 2) throw SizeError("train_test_split: need at least 2 individuals");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValueError("train_test_split: test_fraction must lie in (0, 1)");

    int n_test = static_cast<int>(std::lround(static_cast<double>(n) * test_fraction));
    n_test = std::max(1, std::min(n - 1, n_test));

    std::vector<int> indices(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    shuffle_in_place(indices, rng);

    std::vector<int> test_idx(indices.begin(), indices.begin() + n_test);
    std::vector<int> train_idx(indices.begin() + n_test, indices.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {select_individuals(batch, train_idx), select_individuals(batch, test_idx)};
}

TrajectoryBatch with_replaced_states(const TrajectoryBatch& batch,
                                     const Eigen::MatrixXd& states,
                                     int state_dim,
                                     const Eigen::MatrixXd* rewards) {
    if (states.rows() != batch.num_individuals() ||
        states.cols() != static_cast<Eigen::Index>(batch.horizon + 1) * state_dim)
        throw ShapeError("with_replaced_states: states must be N x (T+1)*d");
    TrajectoryBatch out = batch;
    out.states = states;
    out.state_dim = state_dim;
    out.state_labels.clear();
    if (rewards != nullptr) {
        if (rewards->rows() != batch.num_individuals() || rewards->cols() != batch.horizon)
            throw ShapeError("with_replaced_states: rewards must be N x T");
        out.rewards = *rewards;
    }
    return out;
}

}  // namespace cfrl
