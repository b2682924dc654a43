#include "xtail/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "xtail/common.hpp"
#include "xtail/random.hpp"

namespace xtail {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw Error("config", "invalid value '" + value + "' for config key '" + key + "'");
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) bad_value(key, value);
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) bad_value(key, value);
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size() || value.find('-') != std::string::npos)
            bad_value(key, value);
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value,
                          T (*item)(const std::string&, const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) bad_value(key, value);
        out.push_back(item(key, part));
    }
    if (out.empty()) bad_value(key, value);
    return out;
}

std::int64_t item_i64(const std::string& key, const std::string& value) {
    return parse_i64(key, value);
}

std::int32_t item_i32(const std::string& key, const std::string& value) {
    std::int64_t v = parse_i64(key, value);
    if (v < INT32_MIN || v > INT32_MAX) bad_value(key, value);
    return static_cast<std::int32_t>(v);
}

}  // namespace

void apply_config_value(PipelineConfig& c, const std::string& key,
                        const std::string& value) {
    if (key == "workdir") {
        if (value.empty()) bad_value(key, value);
        c.workdir = value;
    } else if (key == "train") {
        c.train_path = value;
    } else if (key == "test") {
        c.test_path = value;
    } else if (key == "labels") {
        c.labels_path = value;
    } else if (key == "corpus.min_df") {
        c.vocab.min_df = parse_i64(key, value);
    } else if (key == "corpus.max_df_ratio") {
        c.vocab.max_df_ratio = parse_f64(key, value);
    } else if (key == "synth.labels") {
        c.synth.num_labels = parse_i64(key, value);
    } else if (key == "synth.train_docs") {
        c.synth.train_docs = parse_i64(key, value);
    } else if (key == "synth.test_docs") {
        c.synth.test_docs = parse_i64(key, value);
    } else if (key == "synth.vocab") {
        c.synth.vocab_size = parse_i64(key, value);
    } else if (key == "synth.zipf") {
        c.synth.zipf_exponent = parse_f64(key, value);
    } else if (key == "synth.labels_per_doc") {
        c.synth.labels_per_doc = parse_f64(key, value);
    } else if (key == "svm.epochs") {
        c.svm.epochs = item_i32(key, value);
    } else if (key == "svm.learning_rate") {
        c.svm.learning_rate = parse_f64(key, value);
    } else if (key == "svm.l2") {
        c.svm.l2 = parse_f64(key, value);
    } else if (key == "svm.batch_size") {
        c.svm.batch_size = item_i32(key, value);
    } else if (key == "keywords.top_k") {
        c.pseudo.top_k = parse_i64(key, value);
    } else if (key == "keywords.max_len") {
        c.pseudo.max_len = parse_i64(key, value);
    } else if (key == "encoder.dim") {
        c.encoder.dim = item_i32(key, value);
    } else if (key == "encoder.epochs") {
        c.encoder.epochs = item_i32(key, value);
    } else if (key == "encoder.pretrain_epochs") {
        c.encoder.pretrain_epochs = item_i32(key, value);
    } else if (key == "encoder.batch_size") {
        c.encoder.batch_size = item_i32(key, value);
    } else if (key == "encoder.label_pool") {
        c.encoder.label_pool = item_i32(key, value);
    } else if (key == "encoder.hard_negatives") {
        c.encoder.hard_negatives = item_i32(key, value);
    } else if (key == "encoder.lr_embedding") {
        c.encoder.lr_embedding = parse_f64(key, value);
    } else if (key == "encoder.lr_pooler") {
        c.encoder.lr_pooler = parse_f64(key, value);
    } else if (key == "encoder.lr_head") {
        c.encoder.lr_head = parse_f64(key, value);
    } else if (key == "encoder.ensemble_weight") {
        c.encoder.ensemble_weight = parse_f64(key, value);
    } else if (key == "encoder.pseudo_len") {
        c.encoder.pseudo_len = item_i32(key, value);
    } else if (key == "encoder.train_head_in_pair") {
        c.encoder.train_head_in_pair = parse_bool(key, value);
    } else if (key == "metrics.ks") {
        c.eval_ks = parse_list<std::int64_t>(key, value, item_i64);
    } else if (key == "metrics.macro_k") {
        c.macro_k = parse_i64(key, value);
    } else if (key == "metrics.propensity_a") {
        c.propensity.a = parse_f64(key, value);
    } else if (key == "metrics.propensity_b") {
        c.propensity.b = parse_f64(key, value);
    } else if (key == "metrics.psp_normalized") {
        c.psp_normalized = parse_bool(key, value);
    } else if (key == "metrics.bin_scheme") {
        if (value == "ranges")
            c.bin_scheme = BinScheme::DigitRanges;
        else if (value == "fixed")
            c.bin_scheme = BinScheme::FixedSize;
        else
            bad_value(key, value);
    } else if (key == "metrics.bin_size") {
        c.bin_size = parse_i64(key, value);
    } else if (key == "metrics.tail_lo") {
        c.tail_lo = parse_i64(key, value);
    } else if (key == "metrics.tail_hi") {
        c.tail_hi = parse_i64(key, value);
    } else if (key == "theory.dims") {
        c.theory_dims = parse_list<std::int32_t>(key, value, item_i32);
    } else if (key == "theory.trials") {
        c.theory_trials = parse_i64(key, value);
    } else if (key == "theory.source") {
        if (value != "synthetic" && value != "model") bad_value(key, value);
        c.theory_source = value;
    } else if (key == "theory.negatives") {
        c.theory_negatives = parse_i64(key, value);
    } else if (key == "theory.gamma") {
        c.theory_gamma = parse_f64(key, value);
    } else if (key == "theory.instances") {
        c.theory_instances = parse_i64(key, value);
    } else if (key == "seed") {
        c.seed = parse_u64(key, value);
    } else if (key == "threads") {
        std::int64_t v = parse_i64(key, value);
        if (v < 1 || v > 1024) bad_value(key, value);
        c.threads = static_cast<std::int32_t>(v);
    } else {
        throw Error("config", "unknown config key '" + key + "'");
    }
}

void load_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open config file '" + path.string() + "'");
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("config", "expected key = value at " + path.string() + ":" +
                                      std::to_string(lineno));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw Error("config", "empty config key at " + path.string() + ":" +
                                      std::to_string(lineno));
        apply_config_value(config, key, value);
    }
}

void apply_env_overrides(PipelineConfig& config) {
    const char* env = std::getenv("XTAIL_SEED");
    if (env != nullptr && *env != '\0')
        config.seed = parse_u64("XTAIL_SEED", std::string(env));
}

// Fixed stream tags keep the stage streams apart no matter which commands run
// in a session.
std::uint64_t synth_seed(const PipelineConfig& c) { return derive_seed(c.seed, 0x51); }
std::uint64_t svm_seed(const PipelineConfig& c) { return derive_seed(c.seed, 0x52); }
std::uint64_t encoder_seed(const PipelineConfig& c) { return derive_seed(c.seed, 0x53); }
std::uint64_t theory_seed(const PipelineConfig& c) { return derive_seed(c.seed, 0x54); }

}  // namespace xtail
