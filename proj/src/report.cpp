#include "ganad/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "csv.hpp"
#include "ganad/errors.hpp"

namespace ganad {

namespace fs = std::filesystem;

namespace {

constexpr int kWidth = 560, kHeight = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame padded(double x0, double x1, double y0, double y1)
{
    if (!(x1 > x0)) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (!(y1 > y0)) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    return {x0, x1, y0, y1};
}

void open_svg(std::ostringstream& os, const std::string& title, const Frame& f, const std::string& x_label,
              const std::string& y_label)
{
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4, yv = f.y0 + (f.y1 - f.y0) * i / 4;
        os << "<text x=\"" << f.px(xv) << "\" y=\"" << kHeight - kBottom + 15 << "\" text-anchor=\"middle\">" << xv
           << "</text>\n";
        os << "<text x=\"" << kLeft - 5 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << yv
           << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" transform=\"rotate(-90 14 "
       << (kTop + kHeight - kBottom) / 2 << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& names)
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        const int y = kTop + 4 + static_cast<int>(i) * 14;
        os << "<rect x=\"" << kWidth - kRight - 120 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
           << kPalette[i % 6] << "\"/>\n<text x=\"" << kWidth - kRight - 105 << "\" y=\"" << y + 9 << "\">"
           << escape(names[i]) << "</text>\n";
    }
}

double to_double(const std::string& s)
{
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label)
{
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!std::isfinite(x0)) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    const Frame f = padded(x0, x1, y0, y1);
    std::ostringstream os;
    open_svg(os, title, f, x_label, y_label);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        names.push_back(s.name);
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[k % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                os << f.px(s.x[i]) << ',' << f.py(s.y[i]) << ' ';
        os << "\"/>\n";
    }
    legend(os, names);
    os << "</svg>\n";
    return os.str();
}

std::string svg_histogram(const std::string& title, const std::vector<double>& edges,
                          const std::map<std::string, std::vector<std::size_t>>& counts, bool normalize)
{
    if (edges.size() < 2)
        throw std::invalid_argument("histogram needs at least one bin");
    std::map<std::string, std::vector<double>> heights;
    double top = 0.0;
    for (const auto& [name, c] : counts) {
        double total = 0.0;
        for (auto v : c)
            total += static_cast<double>(v);
        auto& h = heights[name];
        for (std::size_t b = 0; b < c.size(); ++b) {
            const double width = edges[b + 1] - edges[b];
            h.push_back(normalize && total > 0 ? static_cast<double>(c[b]) / (total * width) : static_cast<double>(c[b]));
            top = std::max(top, h.back());
        }
    }
    const Frame f = padded(edges.front(), edges.back(), 0.0, top);
    std::ostringstream os;
    open_svg(os, title, f, "value", normalize ? "density" : "count");
    std::vector<std::string> names;
    std::size_t k = 0;
    for (const auto& [name, h] : heights) {
        names.push_back(name);
        for (std::size_t b = 0; b < h.size(); ++b) {
            const double xa = f.px(edges[b]), xb = f.px(edges[b + 1]);
            os << "<rect x=\"" << xa << "\" y=\"" << f.py(h[b]) << "\" width=\"" << std::max(0.0, xb - xa)
               << "\" height=\"" << f.py(0.0) - f.py(h[b]) << "\" fill=\"" << kPalette[k % 6]
               << "\" fill-opacity=\"0.45\"/>\n";
        }
        ++k;
    }
    legend(os, names);
    os << "</svg>\n";
    return os.str();
}

std::string svg_roc(const RocResult& roc)
{
    Series curve{"ROC", {}, {}};
    for (const auto& p : roc.points) {
        curve.x.push_back(p.fpr);
        curve.y.push_back(p.tpr);
    }
    Series chance{"chance", {0.0, 1.0}, {0.0, 1.0}};
    std::ostringstream title;
    title << "ROC (AUC " << std::fixed << std::setprecision(3) << roc.auc << ")";
    return svg_line_chart(title.str(), {curve, chance}, "false positive rate", "true positive rate");
}

std::string svg_latent_histogram(const LatentAnalysis& analysis)
{
    std::map<std::string, std::vector<std::size_t>> counts;
    std::vector<double> edges;
    for (const auto& [label, h] : analysis.histograms) {
        counts[std::string(to_string(label))] = h.counts;
        edges = h.edges;
    }
    return svg_histogram("Latent coefficients", edges, counts);
}

std::string write_report(const fs::path& run_dir)
{
    if (!fs::is_directory(run_dir))
        throw MissingInputError("run directory not found: " + run_dir.string());
    std::ostringstream md;
    md << std::setprecision(4);
    md << "# Run report: " << run_dir.filename().string() << "\n\n";
    bool anything = false;

    if (fs::exists(run_dir / "config.json")) {
        anything = true;
        const auto cfg = nlohmann::json::parse(io::read_text(run_dir / "config.json"));
        md << "## Configuration\n\n";
        md << "- seed: " << cfg.value("seed", 0) << "\n";
        if (cfg.contains("train")) {
            const auto& t = cfg["train"];
            md << "- encoder mode: " << t.value("encoder_mode", "?") << "\n";
            md << "- latent dim: " << t.value("latent_dim", 0) << ", base channels: " << t.value("base_channels", 0)
               << "\n";
            md << "- steps per phase: " << t.value("steps_per_phase", 0)
               << ", progressive: " << (t.value("progressive", false) ? "yes" : "no") << "\n";
        }
        if (cfg.contains("score"))
            md << "- score weight λ: " << cfg["score"].value("lambda", 0.0) << ", threshold α: "
               << cfg["score"].value("alpha", 0.0) << "\n";
        md << "\n";
    }

    if (fs::exists(run_dir / "train_log.csv")) {
        anything = true;
        const auto t = csv::read(run_dir / "train_log.csv");
        const int step = t.column("step"), stage = t.column("stage"), cl = t.column("critic_loss"),
                  gl = t.column("generator_loss"), el = t.column("encoder_loss"), wt = t.column("wall_time");
        Series critic{"critic", {}, {}}, gen{"generator", {}, {}}, enc{"encoder", {}, {}};
        for (const auto& r : t.rows) {
            const double s = to_double(r[step]);
            if (r[stage] == "gan") {
                critic.x.push_back(s);
                critic.y.push_back(to_double(r[cl]));
                gen.x.push_back(s);
                gen.y.push_back(to_double(r[gl]));
            }
            enc.x.push_back(s);
            enc.y.push_back(to_double(r[el]));
        }
        io::write_text(run_dir / "training.svg", svg_line_chart("Training losses", {critic, gen, enc}, "step", "loss"));
        md << "## Training\n\n";
        if (!t.rows.empty()) {
            const auto& last = t.rows.back();
            md << "- logged rows: " << t.rows.size() << ", last step: " << last[step] << " (" << last[stage]
               << ")\n";
            md << "- final critic loss " << last[cl] << ", generator loss " << last[gl] << ", encoder loss "
               << last[el] << "\n";
            md << "- wall time: " << last[wt] << " s\n";
        }
        md << "\n![training losses](training.svg)\n\n";
    }

    if (fs::exists(run_dir / "scores.csv")) {
        anything = true;
        const auto t = csv::read(run_dir / "scores.csv");
        const int flag = t.column("is_anomaly");
        std::size_t flagged = 0;
        for (const auto& r : t.rows)
            flagged += flag >= 0 && r[flag] == "1";
        md << "## Scores\n\n- scored samples: " << t.rows.size() << ", flagged anomalous: " << flagged << "\n\n";
    }

    if (fs::exists(run_dir / "summary.json")) {
        anything = true;
        const auto s = nlohmann::json::parse(io::read_text(run_dir / "summary.json"));
        if (s.contains("auc")) {
            md << "## Detection\n\n- AUC (" << s.value("variant", "combined") << "): " << s["auc"].get<double>()
               << "\n- anomalies: " << s.value("positives", 0) << ", normals: " << s.value("negatives", 0) << "\n\n";
            if (fs::exists(run_dir / "roc.csv")) {
                const auto roc_t = csv::read(run_dir / "roc.csv");
                RocResult roc;
                roc.auc = s["auc"].get<double>();
                for (const auto& r : roc_t.rows)
                    roc.points.push_back({to_double(r[0]), to_double(r[1]), to_double(r[2])});
                io::write_text(run_dir / "roc.svg", svg_roc(roc));
                md << "![ROC](roc.svg)\n\n";
            }
        }
    }

    if (fs::exists(run_dir / "latent_norms.csv")) {
        anything = true;
        const auto t = csv::read(run_dir / "latent_norms.csv");
        std::map<std::string, std::vector<double>> norms;
        for (const auto& r : t.rows)
            norms[r[1]].push_back(to_double(r[2]));
        md << "## Latent norms\n\n| label | n | mean | q1 | median | q3 |\n|---|---|---|---|---|---|\n";
        for (const auto& [label, v] : norms) {
            const auto st = norm_stats(v);
            md << "| " << label << " | " << st.count << " | " << st.mean << " | " << st.q1 << " | " << st.median
               << " | " << st.q3 << " |\n";
        }
        md << "\n";
    }

    if (fs::exists(run_dir / "latent_coeffs.csv")) {
        const auto t = csv::read(run_dir / "latent_coeffs.csv");
        std::map<std::string, std::vector<std::size_t>> counts;
        std::vector<double> edges;
        std::string first;
        for (const auto& r : t.rows) {
            if (first.empty())
                first = r[0];
            if (r[0] == first) {
                if (edges.empty())
                    edges.push_back(to_double(r[1]));
                edges.push_back(to_double(r[2]));
            }
            counts[r[0]].push_back(static_cast<std::size_t>(to_double(r[3])));
        }
        if (edges.size() >= 2) {
            io::write_text(run_dir / "latent_hist.svg", svg_histogram("Latent coefficients", edges, counts));
            md << "![latent coefficient histogram](latent_hist.svg)\n\n";
        }
    }

    if (fs::exists(run_dir / "sweep.csv")) {
        anything = true;
        const auto t = csv::read(run_dir / "sweep.csv");
        std::map<std::tuple<std::string, std::string>, std::map<std::string, std::vector<double>>> grid;
        std::set<std::string> gammas;
        std::size_t failed = 0;
        for (const auto& r : t.rows) {
            gammas.insert(r[0]);
            auto& cell = grid[{r[1], r[2]}][r[0]];
            if (r[4] == "failed")
                ++failed;
            else
                cell.push_back(to_double(r[4]));
        }
        md << "## Sweep (median AUC over seeds)\n\n| mode | score |";
        for (const auto& g : gammas)
            md << " γ=" << g << " |";
        md << "\n|---|---|";
        for (std::size_t i = 0; i < gammas.size(); ++i)
            md << "---|";
        md << "\n";
        for (const auto& [key, by_gamma] : grid) {
            md << "| " << std::get<0>(key) << " | " << std::get<1>(key) << " |";
            for (const auto& g : gammas) {
                const auto it = by_gamma.find(g);
                if (it == by_gamma.end() || it->second.empty())
                    md << " failed |";
                else
                    md << ' ' << median(it->second) << " |";
            }
            md << "\n";
        }
        if (failed > 0)
            md << "\n" << failed << " cell(s) failed; see runs.csv.\n";
        md << "\n";
    }

    if (!anything)
        md << "No recognised artifacts in this directory.\n";
    const auto text = md.str();
    io::write_text(run_dir / "report.md", text);
    return text;
}

}  // namespace ganad
