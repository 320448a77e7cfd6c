#include "fwl/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fwl {

namespace {

void ensure_parent_dir(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::ofstream open_out(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

void write_header(std::ofstream& out, const HeaderLines& header) {
    for (const auto& line : header) out << "# " << line << "\n";
}

const char* kind_name(LabelKind k) {
    switch (k) {
        case LabelKind::Weak: return "weak";
        case LabelKind::Strong: return "strong";
        case LabelKind::Soft: return "soft";
    }
    return "?";
}

LabelKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "weak") return LabelKind::Weak;
    if (s == "strong") return LabelKind::Strong;
    if (s == "soft") return LabelKind::Soft;
    throw std::runtime_error(where + ": unknown label kind '" + s + "'");
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    // shortest representation that round-trips a double exactly
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_pairwise_tsv(const std::string& path, const std::vector<PairwiseSample>& samples,
                       const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    for (const auto& s : samples) {
        if (s.label_kind == LabelKind::Soft)
            throw std::invalid_argument("save_pairwise_tsv: soft samples go to save_soft_tsv");
        out << s.query_id << '\t' << s.pos_doc_id << '\t' << s.neg_doc_id << '\t'
            << format_double(s.label) << '\t' << kind_name(s.label_kind) << '\n';
    }
}

std::vector<PairwiseSample> load_pairwise_tsv(const std::string& path) {
    auto in = open_in(path);
    std::vector<PairwiseSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto f = split_tabs(line);
        if (f.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 5 tab-separated fields");
        PairwiseSample s;
        s.query_id = f[0];
        s.pos_doc_id = f[1];
        s.neg_doc_id = f[2];
        s.label = std::stod(f[3]);
        s.label_kind = parse_kind(f[4], path + ":" + std::to_string(lineno));
        out.push_back(std::move(s));
    }
    return out;
}

void save_soft_tsv(const std::string& path, const std::vector<SoftSample>& samples,
                   const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    for (const auto& s : samples)
        out << s.sample.query_id << '\t' << s.sample.pos_doc_id << '\t' << s.sample.neg_doc_id
            << '\t' << format_double(s.soft_label) << '\t'
            << format_double(s.uncertainty_value) << '\n';
}

std::vector<SoftSample> load_soft_tsv(const std::string& path) {
    auto in = open_in(path);
    std::vector<SoftSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto f = split_tabs(line);
        if (f.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 5 tab-separated fields");
        SoftSample s;
        s.sample.query_id = f[0];
        s.sample.pos_doc_id = f[1];
        s.sample.neg_doc_id = f[2];
        s.soft_label = std::stod(f[3]);
        s.uncertainty_value = std::stod(f[4]);
        s.sample.label = s.soft_label;
        s.sample.label_kind = LabelKind::Soft;
        s.sample.uncertainty = s.uncertainty_value;
        out.push_back(std::move(s));
    }
    return out;
}

void save_corpus_tsv(const std::string& docs_path, const Corpus& corpus) {
    auto out = open_out(docs_path);
    for (const auto& d : corpus.documents) {
        out << d.id << '\t';
        for (std::size_t i = 0; i < d.tokens.size(); ++i)
            out << (i ? " " : "") << corpus.terms[d.tokens[i]];
        out << '\n';
    }
}

void save_queries_tsv(const std::string& path, const Corpus& corpus,
                      const std::vector<Query>& queries) {
    auto out = open_out(path);
    for (const auto& q : queries) {
        out << q.id << '\t';
        for (std::size_t i = 0; i < q.tokens.size(); ++i)
            out << (i ? " " : "") << corpus.terms[q.tokens[i]];
        out << '\n';
    }
}

void save_qrels(const std::string& path, const std::vector<Judgment>& judgments) {
    auto out = open_out(path);
    for (const auto& j : judgments)
        out << j.query_id << " 0 " << j.doc_id << ' ' << j.grade << '\n';
}

namespace {

constexpr char kMagic[4] = {'F', 'W', 'L', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}
void put_vec(std::ofstream& out, const std::vector<double>& v) {
    put(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}
std::vector<double> get_vec(std::ifstream& in) {
    std::uint64_t n = 0;
    get(in, n);
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_student(const std::string& path, const StudentParams& params) {
    auto out = open_out(path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::int32_t>(params.vocab_size));
    put(out, static_cast<std::int32_t>(params.embedding_dim));
    put_vec(out, params.embeddings);
    put_vec(out, params.importance);
    put(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        put(out, static_cast<std::int32_t>(l.in));
        put(out, static_cast<std::int32_t>(l.out));
        put_vec(out, l.w);
        put_vec(out, l.b);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

StudentParams load_student(const std::string& path) {
    auto in = open_in(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = 0;
    get(in, version);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    StudentParams p;
    std::int32_t v32 = 0;
    get(in, v32);
    p.vocab_size = v32;
    get(in, v32);
    p.embedding_dim = v32;
    p.embeddings = get_vec(in);
    p.importance = get_vec(in);
    std::uint32_t nl = 0;
    get(in, nl);
    p.layers.resize(nl);
    for (auto& l : p.layers) {
        get(in, v32);
        l.in = v32;
        get(in, v32);
        l.out = v32;
        l.w = get_vec(in);
        l.b = get_vec(in);
    }
    if (p.embeddings.size() !=
            static_cast<std::size_t>(p.vocab_size) * static_cast<std::size_t>(p.embedding_dim) ||
        p.importance.size() != static_cast<std::size_t>(p.vocab_size))
        throw std::runtime_error("checkpoint: shape header mismatch in " + path);
    for (const auto& l : p.layers)
        if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
            l.b.size() != static_cast<std::size_t>(l.out))
            throw std::runtime_error("checkpoint: layer shape mismatch in " + path);
    return p;
}

void save_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows,
                      const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    out << "strategy,seed,fold,query_id,ap,ndcg20\n";
    for (const auto& r : rows)
        out << r.strategy << ',' << r.seed << ',' << r.fold << ',' << r.query_id << ','
            << format_double(r.ap) << ',' << format_double(r.ndcg20) << '\n';
}

void save_run_jsonl(const std::string& path, const std::vector<RunRecord>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        nlohmann::json j;
        j["strategy"] = r.strategy;
        j["seed"] = r.seed;
        j["fold"] = r.fold;
        j["map"] = r.map;
        j["ndcg20"] = r.mean_ndcg20;
        j["wall_clock_sec"] = r.wall_clock_sec;
        j["config"] = r.config_echo;
        out << j.dump() << '\n';
    }
}

void save_significance_json(const std::string& path, const std::string& comparison,
                            const TTestResult& t, const HeaderLines& header) {
    auto out = open_out(path);
    nlohmann::json j;
    j["comparison"] = comparison;
    j["t_stat"] = t.t_stat;
    j["p_value"] = t.p_value;
    j["corrected_p"] = t.corrected_p;
    j["significant_at_0_05"] = t.significant_at_0_05;
    j["n"] = t.n;
    j["header"] = header;
    out << j.dump(2) << '\n';
}

void save_toy1d_csv(const std::string& path, const Toy1dResult& toy, const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    out << "x,true_y,weak_y,step1_fit,teacher_mean,teacher_sigma,eta2,step3_fit,is_strong\n";
    for (const auto& r : toy.rows)
        out << format_double(r.x) << ',' << format_double(r.true_y) << ','
            << format_double(r.weak_y) << ',' << format_double(r.step1_fit) << ','
            << format_double(r.teacher_mean) << ',' << format_double(r.teacher_sigma) << ','
            << format_double(r.eta2) << ',' << format_double(r.step3_fit) << ','
            << (r.is_strong ? 1 : 0) << '\n';
}

void save_sensitivity_csv(const std::string& path, const std::vector<SensitivityRow>& rows,
                          const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    out << "annotator,seed,wa_map,fwl_map,improvement_pct,median_wa_map,median_fwl_map,"
           "median_improvement_pct\n";
    for (const auto& r : rows)
        for (const auto& s : r.per_seed)
            out << r.annotator.name() << ',' << s.seed << ',' << format_double(s.wa_map) << ','
                << format_double(s.fwl_map) << ',' << format_double(s.improvement_pct) << ','
                << format_double(r.median_wa_map) << ',' << format_double(r.median_fwl_map) << ','
                << format_double(r.median_improvement_pct) << '\n';
}

void save_beta_sweep_csv(const std::string& path, const std::vector<BetaSweepRow>& rows,
                         const HeaderLines& header) {
    auto out = open_out(path);
    write_header(out, header);
    out << "beta,map,ndcg20\n";
    for (const auto& r : rows)
        out << format_double(r.beta) << ',' << format_double(r.map) << ','
            << format_double(r.mean_ndcg20) << '\n';
}

}  // namespace fwl
