#include "fedawa/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fedawa {

namespace {

enum class FieldType { kString, kInt, kFloat, kBool, kIntList };

struct FieldSpec {
    const char* key; // "section.key"
    FieldType type;
    const char* default_text; // canonical default literal
    const char* doc;
};

// Single source of truth for sections, keys, defaults, and docs. Order here
// is the canonical emission order.
const FieldSpec kSchema[] = {
    {"run.strategy", FieldType::kString, "\"fedavg\"",
     "aggregation strategy: fedavg|fedprox|feddisco|ldawa|fedawa|fedawa_l|fedawa_cos"},
    {"run.rounds", FieldType::kInt, "50", "communication rounds T"},
    {"run.clients", FieldType::kInt, "20", "number of clients K"},
    {"run.participation", FieldType::kFloat, "1", "fraction of clients sampled per round, in (0,1]"},
    {"run.eval_every", FieldType::kInt, "1", "evaluate the global model every this many rounds"},
    {"run.master_seed", FieldType::kInt, "42", "seed from which all per-round/client streams derive"},
    {"data.source", FieldType::kString, "\"blobs\"", "dataset source: blobs|idx|csv"},
    {"data.partition", FieldType::kString, "\"dirichlet\"", "partitioner: dirichlet|extreme_groups"},
    {"data.classes", FieldType::kInt, "10", "class count (blobs source)"},
    {"data.dims", FieldType::kInt, "32", "feature dimension (blobs source)"},
    {"data.samples_per_class", FieldType::kInt, "200", "training samples per class (blobs source)"},
    {"data.test_samples_per_class", FieldType::kInt, "100", "held-out samples per class (blobs source)"},
    {"data.spread", FieldType::kFloat, "1", "blob standard deviation; class means sit at 3*spread"},
    {"data.alpha", FieldType::kFloat, "0.10000000000000001", "Dirichlet concentration; smaller = more non-IID"},
    {"data.min_samples", FieldType::kInt, "2", "minimum samples per client"},
    {"data.train_images", FieldType::kString, "\"\"", "IDX training images path (idx source)"},
    {"data.train_labels", FieldType::kString, "\"\"", "IDX training labels path (idx source)"},
    {"data.test_images", FieldType::kString, "\"\"", "IDX test images path (idx source)"},
    {"data.test_labels", FieldType::kString, "\"\"", "IDX test labels path (idx source)"},
    {"data.train_csv", FieldType::kString, "\"\"", "training CSV path (csv source)"},
    {"data.test_csv", FieldType::kString, "\"\"", "test CSV path (csv source)"},
    {"model.layers", FieldType::kIntList, "[32, 64, 10]", "MLP sizes: input, hidden..., classes"},
    {"model.activation", FieldType::kString, "\"relu\"", "hidden activation: relu|tanh"},
    {"model.init_seed", FieldType::kInt, "1", "weight initialization seed"},
    {"train.initial_lr", FieldType::kFloat, "0.080000000000000002", "round-1 learning rate"},
    {"train.lr_decay", FieldType::kFloat, "0.98999999999999999", "per-round learning-rate decay factor"},
    {"train.momentum", FieldType::kFloat, "0.90000000000000002", "SGD momentum"},
    {"train.weight_decay", FieldType::kFloat, "0.00050000000000000001", "coupled L2 weight decay"},
    {"train.local_epochs", FieldType::kInt, "1", "local epochs E per round"},
    {"train.batch_size", FieldType::kInt, "32", "minibatch size (final partial batch is kept)"},
    {"train.prox_mu", FieldType::kFloat, "0.01", "FedProx pull-back coefficient (fedprox strategy only)"},
    {"awa.steps", FieldType::kInt, "200", "weight-optimizer gradient steps (0 = keep initial weights)"},
    {"awa.step_size", FieldType::kFloat, "0.0015", "weight-optimizer step size"},
    {"awa.reg", FieldType::kString, "\"cosine\"", "global-alignment regularizer: none|euclid|cosine"},
    {"awa.reg_coeff", FieldType::kFloat, "1", "regularizer coefficient"},
    {"awa.warm_start", FieldType::kBool, "true", "initialize each round from the previous round's weights"},
    {"disco.a", FieldType::kFloat, "0.5", "FedDisco discrepancy coefficient"},
    {"disco.b", FieldType::kFloat, "0.10000000000000001", "FedDisco shift constant"},
};

const FieldSpec* find_field(const std::string& dotted) {
    for (const FieldSpec& f : kSchema) {
        if (dotted == f.key) return &f;
    }
    return nullptr;
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

ConfigValue parse_value(const FieldSpec& field, const std::string& raw, int line_no) {
    const std::string text = trim(raw);
    auto fail = [&](const std::string& why) -> ConfigError {
        return ConfigError(std::string(field.key) + ": " + why + " (line " + std::to_string(line_no) + ")");
    };
    switch (field.type) {
        case FieldType::kString: {
            if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
                throw fail("expected a quoted string, got '" + text + "'");
            }
            return text.substr(1, text.size() - 2);
        }
        case FieldType::kBool: {
            if (text == "true") return true;
            if (text == "false") return false;
            throw fail("expected true or false, got '" + text + "'");
        }
        case FieldType::kInt: {
            try {
                std::size_t used = 0;
                const std::int64_t v = std::stoll(text, &used);
                if (used != text.size()) throw std::invalid_argument(text);
                return v;
            } catch (const std::exception&) {
                throw fail("expected an integer, got '" + text + "'");
            }
        }
        case FieldType::kFloat: {
            try {
                std::size_t used = 0;
                const double v = std::stod(text, &used);
                if (used != text.size()) throw std::invalid_argument(text);
                return v;
            } catch (const std::exception&) {
                throw fail("expected a number, got '" + text + "'");
            }
        }
        case FieldType::kIntList: {
            if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
                throw fail("expected [a, b, ...], got '" + text + "'");
            }
            std::vector<std::int64_t> items;
            std::stringstream ss(text.substr(1, text.size() - 2));
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                const std::string item = trim(cell);
                if (item.empty()) continue;
                try {
                    std::size_t used = 0;
                    items.push_back(std::stoll(item, &used));
                    if (used != item.size()) throw std::invalid_argument(item);
                } catch (const std::exception&) {
                    throw fail("bad list element '" + item + "'");
                }
            }
            return items;
        }
    }
    throw fail("unhandled field type");
}

std::string value_text(const FieldSpec& field, const ConfigValue& v) {
    switch (field.type) {
        case FieldType::kString: return "\"" + std::get<std::string>(v) + "\"";
        case FieldType::kBool: return std::get<bool>(v) ? "true" : "false";
        case FieldType::kInt: return std::to_string(std::get<std::int64_t>(v));
        case FieldType::kFloat: return format_float(std::get<double>(v));
        case FieldType::kIntList: {
            std::string out = "[";
            const auto& items = std::get<std::vector<std::int64_t>>(v);
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) out += ", ";
                out += std::to_string(items[i]);
            }
            return out + "]";
        }
    }
    return "";
}

} // namespace

std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const ConfigValue& ConfigDoc::at(const std::string& dotted) const {
    const auto it = values.find(dotted);
    if (it == values.end()) throw ConfigError(dotted + ": unknown config field");
    return it->second;
}

std::string ConfigDoc::get_string(const std::string& dotted) const { return std::get<std::string>(at(dotted)); }
std::int64_t ConfigDoc::get_int(const std::string& dotted) const { return std::get<std::int64_t>(at(dotted)); }

double ConfigDoc::get_float(const std::string& dotted) const {
    const ConfigValue& v = at(dotted);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    return std::get<double>(v);
}

bool ConfigDoc::get_bool(const std::string& dotted) const { return std::get<bool>(at(dotted)); }

std::vector<std::int64_t> ConfigDoc::get_int_list(const std::string& dotted) const {
    return std::get<std::vector<std::int64_t>>(at(dotted));
}

void ConfigDoc::set(const std::string& dotted, ConfigValue v) {
    const FieldSpec* field = find_field(dotted);
    if (!field) throw ConfigError(dotted + ": unknown config field");
    values[dotted] = std::move(v);
}

ConfigDoc default_config() {
    ConfigDoc doc;
    for (const FieldSpec& f : kSchema) {
        doc.values[f.key] = parse_value(f, f.default_text, 0);
    }
    return doc;
}

ConfigDoc parse_config_text(const std::string& text) {
    ConfigDoc doc = default_config();
    std::stringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config: unterminated section header at line " + std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("config: empty section name at line " + std::to_string(line_no));
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected 'key = value' at line " + std::to_string(line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        if (section.empty()) {
            throw ConfigError(key + ": key outside any [section] at line " + std::to_string(line_no));
        }
        const std::string dotted = section + "." + key;
        const FieldSpec* field = find_field(dotted);
        if (!field) throw ConfigError(dotted + ": unknown config field (line " + std::to_string(line_no) + ")");
        doc.values[dotted] = parse_value(*field, line.substr(eq + 1), line_no);
    }
    return doc;
}

ConfigDoc load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_text(const ConfigDoc& doc) {
    std::string out;
    std::string section;
    for (const FieldSpec& f : kSchema) {
        const std::string key(f.key);
        const std::size_t dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + value_text(f, doc.at(key)) + "\n";
    }
    return out;
}

std::string config_hash(const ConfigDoc& doc) {
    const std::string text = canonical_text(doc);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string schema_dump() {
    std::string out;
    std::string section;
    for (const FieldSpec& f : kSchema) {
        const std::string key(f.key);
        const std::size_t dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        std::string line = key.substr(dot + 1) + " = " + f.default_text;
        while (line.size() < 40) line += ' ';
        out += line + "# " + f.doc + "\n";
    }
    return out;
}

ExperimentConfig to_experiment_config(const ConfigDoc& doc) {
    ExperimentConfig cfg;

    const std::string strategy = doc.get_string("run.strategy");
    const auto parsed = parse_strategy(strategy);
    if (!parsed) throw ConfigError("run.strategy: unknown strategy '" + strategy + "'");
    cfg.strategy = *parsed;
    cfg.rounds = static_cast<int>(doc.get_int("run.rounds"));
    const std::int64_t clients = doc.get_int("run.clients");
    if (clients < 1) throw ConfigError("run.clients: must be >= 1");
    cfg.clients = static_cast<std::size_t>(clients);
    cfg.participation = doc.get_float("run.participation");
    cfg.eval_every = static_cast<int>(doc.get_int("run.eval_every"));
    cfg.master_seed = static_cast<std::uint64_t>(doc.get_int("run.master_seed"));

    const std::string source = doc.get_string("data.source");
    if (source == "blobs") {
        cfg.data.source = DataSource::kBlobs;
    } else if (source == "idx") {
        cfg.data.source = DataSource::kIdx;
    } else if (source == "csv") {
        cfg.data.source = DataSource::kCsv;
    } else {
        throw ConfigError("data.source: unknown source '" + source + "'");
    }
    const std::string partition = doc.get_string("data.partition");
    if (partition == "dirichlet") {
        cfg.data.partition = PartitionKind::kDirichlet;
    } else if (partition == "extreme_groups") {
        cfg.data.partition = PartitionKind::kExtremeGroups;
    } else {
        throw ConfigError("data.partition: unknown partitioner '" + partition + "'");
    }
    cfg.data.classes = static_cast<int>(doc.get_int("data.classes"));
    cfg.data.dims = static_cast<std::size_t>(doc.get_int("data.dims"));
    cfg.data.samples_per_class = static_cast<std::size_t>(doc.get_int("data.samples_per_class"));
    cfg.data.test_samples_per_class = static_cast<std::size_t>(doc.get_int("data.test_samples_per_class"));
    cfg.data.spread = doc.get_float("data.spread");
    cfg.data.alpha = doc.get_float("data.alpha");
    cfg.data.min_samples = static_cast<std::size_t>(doc.get_int("data.min_samples"));
    cfg.data.train_images = doc.get_string("data.train_images");
    cfg.data.train_labels = doc.get_string("data.train_labels");
    cfg.data.test_images = doc.get_string("data.test_images");
    cfg.data.test_labels = doc.get_string("data.test_labels");
    cfg.data.train_csv = doc.get_string("data.train_csv");
    cfg.data.test_csv = doc.get_string("data.test_csv");

    for (const std::int64_t s : doc.get_int_list("model.layers")) {
        cfg.model.layer_sizes.push_back(static_cast<int>(s));
    }
    const std::string activation = doc.get_string("model.activation");
    if (activation == "relu") {
        cfg.model.activation = Activation::kRelu;
    } else if (activation == "tanh") {
        cfg.model.activation = Activation::kTanh;
    } else {
        throw ConfigError("model.activation: unknown activation '" + activation + "'");
    }
    cfg.model.init_seed = static_cast<std::uint64_t>(doc.get_int("model.init_seed"));

    cfg.train.initial_lr = doc.get_float("train.initial_lr");
    cfg.train.lr_decay = doc.get_float("train.lr_decay");
    cfg.train.momentum = doc.get_float("train.momentum");
    cfg.train.weight_decay = doc.get_float("train.weight_decay");
    cfg.train.local_epochs = static_cast<int>(doc.get_int("train.local_epochs"));
    cfg.train.batch_size = static_cast<int>(doc.get_int("train.batch_size"));
    cfg.train.prox_mu = doc.get_float("train.prox_mu");

    cfg.awa.steps = static_cast<int>(doc.get_int("awa.steps"));
    cfg.awa.step_size = doc.get_float("awa.step_size");
    const std::string reg = doc.get_string("awa.reg");
    if (reg == "none") {
        cfg.awa.reg_kind = RegKind::kNone;
    } else if (reg == "euclid") {
        cfg.awa.reg_kind = RegKind::kEuclid;
    } else if (reg == "cosine") {
        cfg.awa.reg_kind = RegKind::kCosine;
    } else {
        throw ConfigError("awa.reg: unknown regularizer '" + reg + "'");
    }
    cfg.awa.reg_coeff = doc.get_float("awa.reg_coeff");
    cfg.awa.warm_start = doc.get_bool("awa.warm_start");

    cfg.disco.a = doc.get_float("disco.a");
    cfg.disco.b = doc.get_float("disco.b");

    cfg.validate();
    return cfg;
}

} // namespace fedawa
