/// tsab command-line tool: batch stages for building and evaluating the
/// explanation-augmented anomaly benchmark.
///
/// Subcommands: segment, render, elicit, select, detect, evaluate,
/// compare-explanations, report. See README.md for the config file format.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsab/detectors.hpp"
#include "tsab/ingest.hpp"
#include "tsab/pipeline.hpp"
#include "tsab/util.hpp"

namespace {

using nlohmann::json;
using namespace tsab;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitItemFailures = 2;

// ---------------------------------------------------------------------------
// Config file: INI-style sections of key = value pairs.
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Config {
    ConfigMap sections;
    std::string hash;  // sha256 of the raw file; empty when no config given

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const {
        const auto s = sections.find(section);
        if (s == sections.end()) return fallback;
        const auto k = s->second.find(key);
        return k == s->second.end() ? fallback : k->second;
    }
    double get_d(const std::string& s, const std::string& k, double fb) const {
        const std::string v = get(s, k, "");
        return v.empty() ? fb : std::stod(v);
    }
    std::int64_t get_i(const std::string& s, const std::string& k, std::int64_t fb) const {
        const std::string v = get(s, k, "");
        return v.empty() ? fb : std::stoll(v);
    }
};

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path);
    }
    std::stringstream raw;
    raw << in.rdbuf();
    cfg.hash = util::sha256_hex(raw.str());
    std::istringstream lines(raw.str());
    std::string line, section;
    while (std::getline(lines, line)) {
        const std::size_t comment = line.find_first_of(";#");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line without '=': " + line);
        }
        cfg.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

ingest::SegmentationCriteria criteria_from(const Config& cfg) {
    ingest::SegmentationCriteria c;
    c.max_anomaly_ratio = cfg.get_d("segmentation", "max_anomaly_ratio", c.max_anomaly_ratio);
    c.target_ratio_low = cfg.get_d("segmentation", "target_ratio_low", c.target_ratio_low);
    c.target_ratio_high = cfg.get_d("segmentation", "target_ratio_high", c.target_ratio_high);
    c.center_low = cfg.get_d("segmentation", "center_low", c.center_low);
    c.center_high = cfg.get_d("segmentation", "center_high", c.center_high);
    c.min_length = cfg.get_i("segmentation", "min_length", c.min_length);
    return c;
}

render::RenderConfig render_from(const Config& cfg) {
    render::RenderConfig r;
    r.width_px = int(cfg.get_i("render", "width_px", r.width_px));
    r.height_px = int(cfg.get_i("render", "height_px", r.height_px));
    r.line_width_px = int(cfg.get_i("render", "line_width_px", r.line_width_px));
    r.tick_count_target = int(cfg.get_i("render", "tick_count_target", r.tick_count_target));
    r.font_scale = int(cfg.get_i("render", "font_scale", r.font_scale));
    r.margin_px = int(cfg.get_i("render", "margin_px", r.margin_px));
    r.x_axis_mode = cfg.get("render", "x_axis_mode", "index") == "timestamp"
                        ? render::XAxisMode::Timestamp
                        : render::XAxisMode::Index;
    return r;
}

reward::RewardWeights weights_from(const Config& cfg) {
    reward::RewardWeights w;
    w.ano = cfg.get_d("reward", "lambda_ano", w.ano);
    w.vis = cfg.get_d("reward", "lambda_vis", w.vis);
    w.axi = cfg.get_d("reward", "lambda_axi", w.axi);
    w.cla = cfg.get_d("reward", "lambda_cla", w.cla);
    return w;
}

llm::EndpointConfig endpoint_from(const Config& cfg, const std::string& section) {
    llm::EndpointConfig e;
    e.base_url = cfg.get(section, "base_url", "");
    e.model_name = cfg.get(section, "model", section);
    e.api_key_env = cfg.get(section, "api_key_env", e.api_key_env);
    e.timeout_seconds = cfg.get_d(section, "timeout_seconds", e.timeout_seconds);
    e.max_retries = int(cfg.get_i(section, "max_retries", e.max_retries));
    e.backoff_initial_ms = int(cfg.get_i(section, "backoff_initial_ms", e.backoff_initial_ms));
    e.max_parallel = int(cfg.get_i(section, "max_parallel", e.max_parallel));
    e.temperature = cfg.get_d(section, "temperature", e.temperature);
    return e;
}

std::vector<std::string> generator_sections(const Config& cfg) {
    std::vector<std::string> out;
    for (const auto& [name, _] : cfg.sections) {
        if (name.rfind("generator.", 0) == 0) out.push_back(name);
    }
    return out;
}

std::map<std::string, std::string> load_mock_script(const std::string& path) {
    std::map<std::string, std::string> script;
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open mock script " + path);
    }
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto j = json::parse(line);
        script[j.at("fingerprint").get<std::string>()] = j.at("response").get<std::string>();
    }
    return script;
}

std::shared_ptr<llm::ChatClient> make_client(const Config& cfg, const std::string& section,
                                             const std::string& mock_script_path) {
    if (!mock_script_path.empty()) {
        return std::make_shared<llm::MockChatClient>(cfg.get(section, "model", section),
                                                     load_mock_script(mock_script_path));
    }
    return std::make_shared<llm::HttpChatClient>(endpoint_from(cfg, section));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
}

json prf_json(const metrics::Prf& p) {
    return {{"precision", p.precision},
            {"recall", p.recall},
            {"f1", p.f1},
            {"defined", p.defined}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_segment(const Config& cfg, const std::string& input_dir, const std::string& format,
                const std::string& out_path) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(input_dir)) {
        std::cerr << "error: input directory does not exist: " << input_dir << "\n";
        return kExitFatal;
    }
    const auto fmt = format == "json_manifest" ? ingest::SeriesFormat::JsonManifest
                                               : ingest::SeriesFormat::Csv;
    const std::string ext = fmt == ingest::SeriesFormat::Csv ? ".csv" : ".json";
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "error: no " << ext << " files found in " << input_dir << "\n";
        return kExitFatal;
    }

    const auto criteria = criteria_from(cfg);
    std::vector<Segment> all;
    int failures = 0;
    for (const auto& file : files) {
        try {
            const auto series = ingest::load_series(file, fmt);
            auto segs = ingest::segment_series(series, criteria);
            for (auto& s : segs) all.push_back(std::move(s));
        } catch (const DomainError& e) {
            std::cerr << "warning: " << file.string() << ": " << e.what() << "\n";
            ++failures;
        }
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    pipeline::save_segments(out_path, all, cfg.hash);

    double mean_len = 0.0, mean_ratio = 0.0;
    for (const auto& s : all) {
        mean_len += double(s.series.length());
        mean_ratio += double(point_count(s.gt)) / double(s.series.length());
    }
    if (!all.empty()) {
        mean_len /= double(all.size());
        mean_ratio /= double(all.size());
    }
    std::cout << "segments: " << all.size() << "\nmean length: " << mean_len
              << "\nmean anomaly ratio: " << 100.0 * mean_ratio << "%\n";
    return failures > 0 ? kExitItemFailures : kExitOk;
}

int cmd_render(const Config& cfg, const std::string& segments_path, const std::string& out_dir) {
    const auto segments = pipeline::load_segments(segments_path);
    const auto rc = render_from(cfg);
    std::filesystem::create_directories(out_dir);
    for (const auto& seg : segments) {
        render::write_png(std::filesystem::path(out_dir) / (seg.id + ".png"),
                          render::render_plot(seg, rc));
    }
    std::cout << "rendered " << segments.size() << " plots to " << out_dir << "\n";
    return kExitOk;
}

int cmd_elicit(const Config& cfg, const std::string& segments_path, const std::string& out_path,
               const std::string& audit_path, const std::string& mock_script) {
    const auto segments = pipeline::load_segments(segments_path);
    std::vector<std::shared_ptr<llm::ChatClient>> generators;
    for (const auto& section : generator_sections(cfg)) {
        generators.push_back(make_client(cfg, section, mock_script));
    }
    if (generators.empty()) {
        std::cerr << "error: no [generator.*] sections in config\n";
        return kExitFatal;
    }
    std::optional<llm::AuditLog> audit;
    if (!audit_path.empty()) audit.emplace(audit_path);
    const auto records = pipeline::elicit_candidates(segments, generators, render_from(cfg),
                                                     audit ? &*audit : nullptr);
    pipeline::save_candidates(out_path, records, cfg.hash);
    int failures = 0;
    for (const auto& r : records) {
        if (!r.parse_ok) ++failures;
    }
    std::cout << "candidates: " << records.size() << " (" << failures << " parse failures)\n";
    return failures > 0 ? kExitItemFailures : kExitOk;
}

int cmd_select(const Config& cfg, const std::string& segments_path,
               const std::string& candidates_path, const std::string& out_path,
               const std::string& report_path, const std::string& audit_path,
               const std::string& mock_script) {
    const auto segments = pipeline::load_segments(segments_path);
    const auto candidates = pipeline::load_candidates(candidates_path);
    const auto judge = make_client(cfg, "judge", mock_script);
    std::optional<llm::AuditLog> audit;
    if (!audit_path.empty()) audit.emplace(audit_path);

    ingest::ConsensusPolicy consensus;
    consensus.overlap_f1_threshold = cfg.get_d("reward", "consensus_threshold", 0.0);
    const auto selections =
        pipeline::select_candidates(segments, candidates, *judge, render_from(cfg),
                                    weights_from(cfg), consensus, audit ? &*audit : nullptr);
    pipeline::save_selections(out_path, selections, cfg.hash);

    std::vector<std::pair<std::string, std::string>> picks;
    int excluded = 0;
    for (const auto& s : selections) {
        if (s.excluded) {
            std::cerr << "excluded " << s.segment_id << ": " << s.exclusion_reason << "\n";
            ++excluded;
        } else {
            picks.emplace_back(s.segment_id, s.winner_generator);
        }
    }
    const auto rows = reward::composition_report(picks);
    std::ostringstream md;
    md << "| Generator | Count | Percent |\n|---|---|---|\n";
    char buf[128];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "| %s | %lld | %.1f%% |\n", row.generator_id.c_str(),
                      static_cast<long long>(row.count), row.percent);
        md << buf;
    }
    std::cout << md.str();
    if (!report_path.empty()) write_text(report_path, md.str());
    return excluded > 0 ? kExitItemFailures : kExitOk;
}

int cmd_detect(const Config& cfg, const std::string& segments_path, const std::string& kind,
               const std::string& out_path, const std::string& scores_dir) {
    const auto segments = pipeline::load_segments(segments_path);
    detectors::DetectorConfig dc;
    dc.kind = kind == "matrix_profile" ? detectors::DetectorKind::MatrixProfile
              : kind == "iforest"      ? detectors::DetectorKind::IForest
                                       : detectors::DetectorKind::ZScore;
    dc.window = cfg.get_i("detector", "window", dc.window);
    dc.trees = cfg.get_i("detector", "trees", dc.trees);
    dc.sample_size = cfg.get_i("detector", "sample_size", dc.sample_size);
    dc.seed = std::uint64_t(cfg.get_i("pipeline", "seed", 0));
    const double fraction = cfg.get_d("detector", "fraction", 0.05);

    std::vector<pipeline::PredictionRecord> predictions;
    for (const auto& seg : segments) {
        const auto scores = detectors::detector_scores(seg.series, dc);
        predictions.push_back(
            {seg.id, labels_to_intervals(metrics::topk_threshold(scores, fraction))});
        if (!scores_dir.empty()) {
            std::filesystem::create_directories(scores_dir);
            std::ofstream csv(std::filesystem::path(scores_dir) / (seg.id + ".csv"));
            csv << "index,score\n";
            for (std::size_t i = 0; i < scores.size(); ++i) {
                csv << (i + 1) << "," << scores[i] << "\n";
            }
        }
    }
    pipeline::save_predictions(out_path, predictions, cfg.hash);
    std::cout << "predictions for " << predictions.size() << " segments -> " << out_path << "\n";
    return kExitOk;
}

int cmd_evaluate(const Config& cfg, const std::string& segments_path,
                 const std::string& predictions_path, const std::string& from_candidates,
                 const std::string& json_path, const std::string& md_path,
                 const std::string& method) {
    const auto segments = pipeline::load_segments(segments_path);
    std::vector<pipeline::PredictionRecord> predictions;
    if (!from_candidates.empty()) {
        // Per-segment union over one generator's parsed intervals; parse
        // failures score as "no predicted intervals".
        std::map<std::string, IntervalSet> merged;
        for (const auto& seg : segments) merged[seg.id] = {};
        std::int64_t matched = 0;
        for (const auto& c : pipeline::load_candidates(from_candidates)) {
            if (c.generator_id != method || !merged.count(c.segment_id)) continue;
            ++matched;
            if (c.parse_ok) merged[c.segment_id] = c.output.intervals;
        }
        if (matched == 0) {
            throw pipeline::PipelineError("no candidates from generator '" + method +
                                          "' in " + from_candidates);
        }
        for (const auto& [id, set] : merged) predictions.push_back({id, set});
    } else {
        predictions = pipeline::load_predictions(predictions_path);
    }

    const auto corpus = pipeline::evaluate_predictions(segments, predictions);
    json per_segment = json::array();
    for (const auto& se : corpus.per_segment) {
        per_segment.push_back({{"segment_id", se.segment_id},
                               {"length", se.length},
                               {"tp", se.report.confusion.tp},
                               {"fp", se.report.confusion.fp},
                               {"fn", se.report.confusion.fn_},
                               {"interval", prf_json(se.report.interval)},
                               {"overlap", se.report.overlap},
                               {"overlap_both_empty", se.report.overlap_both_empty},
                               {"pointwise", prf_json(se.report.pointwise)},
                               {"affiliation", prf_json(se.report.affiliation)}});
    }
    const json out = {{"method", method},
                      {"config_hash", cfg.hash},
                      {"corpus",
                       {{"tp", corpus.tp},
                        {"fp", corpus.fp},
                        {"fn", corpus.fn},
                        {"interval", prf_json(corpus.interval)},
                        {"overlap_percent", corpus.overlap_percent},
                        {"pointwise", prf_json(corpus.pointwise)},
                        {"affiliation", prf_json(corpus.affiliation)}}},
                      {"per_segment", per_segment}};
    if (!json_path.empty()) write_text(json_path, out.dump(2) + "\n");
    const std::string md = pipeline::corpus_markdown(corpus, method);
    if (!md_path.empty()) write_text(md_path, md);
    std::cout << md;
    return kExitOk;
}

int cmd_compare(const Config& cfg, const std::string& pairs_path, const std::string& json_path,
                const std::string& md_path, const std::string& audit_path,
                const std::string& mock_script, const std::string& a_label,
                const std::string& b_label) {
    std::vector<pipeline::ExplanationPair> pairs;
    {
        std::ifstream in(pairs_path);
        if (!in) {
            std::cerr << "error: cannot open " << pairs_path << "\n";
            return kExitFatal;
        }
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            const auto j = json::parse(line);
            pairs.push_back({j.at("segment_id").get<std::string>(), j.value("context", ""),
                             j.at("explanation_a").get<std::string>(),
                             j.at("explanation_b").get<std::string>()});
        }
    }
    const auto judge = make_client(cfg, "judge", mock_script);
    std::optional<llm::AuditLog> audit;
    if (!audit_path.empty()) audit.emplace(audit_path);
    const auto wr = pipeline::compare_explanations(pairs, *judge, a_label, b_label,
                                                   audit ? &*audit : nullptr);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "| %s win | %s win | Tie |\n|---|---|---|\n| %.1f%% | %.1f%% | %.1f%% |\n",
                  a_label.c_str(), b_label.c_str(), wr.a_percent, wr.b_percent, wr.tie_percent);
    std::cout << buf;
    if (!md_path.empty()) write_text(md_path, buf);
    if (!json_path.empty()) {
        const json out = {{"a_label", a_label},     {"b_label", b_label},
                          {"a_percent", wr.a_percent}, {"b_percent", wr.b_percent},
                          {"tie_percent", wr.tie_percent}, {"count", wr.count},
                          {"config_hash", cfg.hash}};
        write_text(json_path, out.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_report(const std::string& eval_json) {
    std::ifstream in(eval_json);
    if (!in) {
        std::cerr << "error: cannot open " << eval_json << "\n";
        return kExitFatal;
    }
    json j;
    in >> j;
    const auto& c = j.at("corpus");
    pipeline::CorpusEval corpus;
    corpus.tp = c.at("tp").get<std::int64_t>();
    corpus.fp = c.at("fp").get<std::int64_t>();
    corpus.fn = c.at("fn").get<std::int64_t>();
    corpus.interval.precision = c.at("interval").at("precision").get<double>();
    corpus.interval.recall = c.at("interval").at("recall").get<double>();
    corpus.interval.f1 = c.at("interval").at("f1").get<double>();
    corpus.overlap_percent = c.at("overlap_percent").get<double>();
    std::cout << pipeline::corpus_markdown(corpus, j.value("method", "method"));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explanation-augmented time-series anomaly benchmark toolkit"};
    app.require_subcommand(1);

    std::string config_path, input_dir, format = "csv", segments_path = "segments.jsonl";
    std::string out_path, out_dir = "plots", candidates_path = "candidates.jsonl";
    std::string predictions_path = "predictions.jsonl", audit_path, mock_script, scores_dir;
    std::string report_path, json_path, md_path, detector_kind = "zscore";
    std::string pairs_path, from_candidates, method = "external", a_label = "A", b_label = "B";
    std::string eval_json;

    app.add_option("--config", config_path, "pipeline config file (INI sections)");

    auto* seg = app.add_subcommand("segment", "segment labeled series into benchmark windows");
    seg->add_option("--input", input_dir, "directory of input series")->required();
    seg->add_option("--format", format, "csv | json_manifest");
    seg->add_option("--out", segments_path, "segment store (JSONL)");

    auto* ren = app.add_subcommand("render", "render segment plots to PNG files");
    ren->add_option("--segments", segments_path, "segment store");
    ren->add_option("--out-dir", out_dir, "output directory");

    auto* eli = app.add_subcommand("elicit", "elicit candidates from the generator endpoints");
    eli->add_option("--segments", segments_path, "segment store");
    eli->add_option("--out", candidates_path, "candidate store (JSONL)");
    eli->add_option("--audit-log", audit_path, "JSONL transcript; enables resume");
    eli->add_option("--mock-script", mock_script, "fingerprint->response JSONL (offline mode)");

    auto* sel = app.add_subcommand("select", "judge candidates and keep the best per segment");
    sel->add_option("--segments", segments_path, "segment store");
    sel->add_option("--candidates", candidates_path, "candidate store");
    sel->add_option("--out", out_path, "selection store (JSONL)")->required();
    sel->add_option("--report", report_path, "composition report (markdown)");
    sel->add_option("--audit-log", audit_path, "JSONL transcript");
    sel->add_option("--mock-script", mock_script, "judge mock script");

    auto* det = app.add_subcommand("detect", "run a classical detector over the segments");
    det->add_option("--segments", segments_path, "segment store");
    det->add_option("--detector", detector_kind, "zscore | matrix_profile | iforest");
    det->add_option("--out", predictions_path, "prediction store (JSONL)");
    det->add_option("--scores-dir", scores_dir, "optional per-segment score CSV dump");

    auto* eva = app.add_subcommand("evaluate", "evaluate predictions against ground truth");
    eva->add_option("--segments", segments_path, "segment store");
    eva->add_option("--predictions", predictions_path, "prediction store");
    eva->add_option("--from-candidates", from_candidates,
                    "score a generator from a candidate store instead");
    eva->add_option("--method", method, "method name for the report");
    eva->add_option("--json", json_path, "evaluation report (JSON)");
    eva->add_option("--md", md_path, "evaluation report (markdown)");

    auto* cmp = app.add_subcommand("compare-explanations", "pairwise explanation win rates");
    cmp->add_option("--pairs", pairs_path, "pairs JSONL")->required();
    cmp->add_option("--json", json_path, "win-rate report (JSON)");
    cmp->add_option("--md", md_path, "win-rate report (markdown)");
    cmp->add_option("--audit-log", audit_path, "JSONL transcript");
    cmp->add_option("--mock-script", mock_script, "judge mock script");
    cmp->add_option("--a-label", a_label, "display label for explanation A");
    cmp->add_option("--b-label", b_label, "display label for explanation B");

    auto* rep = app.add_subcommand("report", "print the markdown table for an evaluation JSON");
    rep->add_option("--eval-json", eval_json, "evaluation report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const Config cfg = load_config(config_path);
        if (seg->parsed()) return cmd_segment(cfg, input_dir, format, segments_path);
        if (ren->parsed()) return cmd_render(cfg, segments_path, out_dir);
        if (eli->parsed()) {
            return cmd_elicit(cfg, segments_path, candidates_path, audit_path, mock_script);
        }
        if (sel->parsed()) {
            return cmd_select(cfg, segments_path, candidates_path, out_path, report_path,
                              audit_path, mock_script);
        }
        if (det->parsed()) {
            return cmd_detect(cfg, segments_path, detector_kind, predictions_path, scores_dir);
        }
        if (eva->parsed()) {
            return cmd_evaluate(cfg, segments_path, predictions_path, from_candidates, json_path,
                                md_path, method);
        }
        if (cmp->parsed()) {
            return cmd_compare(cfg, pairs_path, json_path, md_path, audit_path, mock_script,
                               a_label, b_label);
        }
        if (rep->parsed()) return cmd_report(eval_json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
