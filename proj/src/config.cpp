// SPDX-License-Identifier: Apache-2.0
#include "mrag/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

namespace mrag {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string interpolate_env(const std::string& value, const std::string& where) {
    std::string out;
    std::size_t pos = 0;
    while (pos < value.size()) {
        std::size_t open = value.find("${", pos);
        if (open == std::string::npos) {
            out += value.substr(pos);
            break;
        }
        out += value.substr(pos, open - pos);
        std::size_t close = value.find('}', open + 2);
        if (close == std::string::npos) {
            throw Error(ErrorCode::bad_input, where + ": unterminated ${ in \"" + value + "\"");
        }
        std::string name = value.substr(open + 2, close - open - 2);
        const char* env = std::getenv(name.c_str());
        if (!env) {
            throw Error(ErrorCode::bad_input,
                        where + ": environment variable " + name + " is not set");
        }
        out += env;
        pos = close + 1;
    }
    return out;
}

int parse_int(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        int parsed = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorCode::bad_input, where + ": expected an integer, got \"" + value + "\"");
    }
}

double parse_double(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorCode::bad_input, where + ": expected a number, got \"" + value + "\"");
    }
}

bool parse_bool(const std::string& value, const std::string& where) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw Error(ErrorCode::bad_input, where + ": expected a boolean, got \"" + value + "\"");
}

void apply_slot_key(BackendSlot& slot, const std::string& key, const std::string& value,
                    const std::string& where) {
    if (key == "base_url") {
        slot.base_url = value;
    } else if (key == "fixtures") {
        slot.fixtures = value;
    } else if (key == "model") {
        slot.model = value;
    } else if (key == "api_key_env") {
        slot.api_key_env = value;
    } else if (key == "timeout_seconds") {
        slot.timeout_seconds = parse_double(value, where);
    } else if (key == "max_attempts") {
        slot.max_attempts = parse_int(value, where);
    } else if (key == "backoff_base_seconds") {
        slot.backoff_base_seconds = parse_double(value, where);
    } else {
        throw Error(ErrorCode::bad_input, where + ": unknown key \"" + key + "\"");
    }
}

void apply_run_key(RunConfig& config, const std::string& key, const std::string& value,
                   const std::string& where) {
    if (key == "dataset") {
        config.dataset_path = value;
    } else if (key == "out") {
        config.output_dir = value;
    } else if (key == "prompts_dir") {
        config.prompts_dir = value;
    } else if (key == "workers") {
        config.workers = parse_int(value, where);
    } else if (key == "seed") {
        config.seed = static_cast<std::uint64_t>(parse_int(value, where));
    } else if (key == "top_k") {
        config.top_k = parse_int(value, where);
    } else if (key == "top_k_i2i") {
        config.top_k_i2i = parse_int(value, where);
    } else if (key == "top_k_t2t") {
        config.top_k_t2t = parse_int(value, where);
    } else if (key == "threshold") {
        config.correctness_threshold = parse_double(value, where);
    } else if (key == "mock") {
        config.mock = parse_bool(value, where);
    } else if (key == "cap_c1" || key == "cap_c2" || key == "cap_c3" || key == "cap_c4") {
        config.caps[static_cast<std::size_t>(key[5] - '1')] = parse_int(value, where);
    } else {
        throw Error(ErrorCode::bad_input, where + ": unknown key \"" + key + "\"");
    }
}

void apply_latency_key(RunConfig& config, const std::string& key, const std::string& value,
                       const std::string& where) {
    if (key == "i2i") {
        config.latency.i2i_seconds = parse_double(value, where);
    } else if (key == "t2t") {
        config.latency.t2t_seconds = parse_double(value, where);
    } else if (key == "t2i") {
        config.latency.t2i_seconds = parse_double(value, where);
    } else if (key == "agent_infer") {
        config.latency.agent_infer_seconds = parse_double(value, where);
    } else {
        throw Error(ErrorCode::bad_input, where + ": unknown key \"" + key + "\"");
    }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source_name) {
    RunConfig config;
    std::map<std::string, BackendSlot*> slots = {{"agent", &config.agent},
                                                 {"task", &config.task},
                                                 {"rewrite", &config.rewrite},
                                                 {"judge", &config.judge},
                                                 {"retrieval", &config.retrieval}};
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++lineno;
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        std::string where = source_name + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorCode::bad_input, where + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "latency" && slots.find(section) == slots.end()) {
                throw Error(ErrorCode::bad_input, where + ": unknown section [" + section + "]");
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::bad_input, where + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = interpolate_env(trim(line.substr(eq + 1)), where);
        if (section == "run") {
            apply_run_key(config, key, value, where);
        } else if (section == "latency") {
            apply_latency_key(config, key, value, where);
        } else if (auto it = slots.find(section); it != slots.end()) {
            apply_slot_key(*it->second, key, value, where);
        } else {
            throw Error(ErrorCode::bad_input, where + ": key \"" + key + "\" outside any section");
        }
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_text_file(path), path.string());
}

namespace {

HttpEndpointConfig endpoint_from_slot(const BackendSlot& slot, const std::string& slot_name) {
    HttpEndpointConfig endpoint;
    endpoint.base_url = slot.base_url;
    endpoint.model = slot.model;
    endpoint.timeout_seconds = slot.timeout_seconds;
    endpoint.retry.max_attempts = slot.max_attempts;
    endpoint.retry.base_delay_seconds = slot.backoff_base_seconds;
    if (!slot.api_key_env.empty()) {
        const char* key = std::getenv(slot.api_key_env.c_str());
        if (!key) {
            throw Error(ErrorCode::bad_input, "backend " + slot_name +
                                                  ": environment variable " + slot.api_key_env +
                                                  " is not set");
        }
        endpoint.api_key = key;
    }
    return endpoint;
}

void check_slot(const BackendSlot& slot, bool force_mock, const std::string& slot_name) {
    if (!slot.base_url.empty() && !slot.fixtures.empty()) {
        throw Error(ErrorCode::bad_input,
                    "backend " + slot_name + ": set base_url or fixtures, not both");
    }
    if (slot.base_url.empty() && slot.fixtures.empty()) {
        throw Error(ErrorCode::bad_input,
                    "backend " + slot_name + ": needs a base_url or a fixtures path");
    }
    if (force_mock && slot.fixtures.empty()) {
        throw Error(ErrorCode::bad_input,
                    "backend " + slot_name + ": --mock requires a fixtures path");
    }
}

}  // namespace

std::shared_ptr<ModelBackend> make_model_backend(const BackendSlot& slot, bool force_mock,
                                                 const std::string& slot_name) {
    check_slot(slot, force_mock, slot_name);
    if (!slot.fixtures.empty()) return MockModelBackend::from_fixture_file(slot.fixtures);
    return std::make_shared<HttpModelBackend>(endpoint_from_slot(slot, slot_name));
}

std::shared_ptr<SearchBackend> make_search_backend(const BackendSlot& slot, bool force_mock,
                                                   const std::string& slot_name) {
    check_slot(slot, force_mock, slot_name);
    if (!slot.fixtures.empty()) return MockSearchBackend::from_fixture_file(slot.fixtures);
    return std::make_shared<HttpSearchBackend>(endpoint_from_slot(slot, slot_name));
}

}  // namespace mrag
