// Copyright (c) 2026 The gpanet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gpanet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gpanet {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& where, const std::string& what) {
  throw DataError("config: " + where + ": " + what);
}

std::int64_t to_int(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad_value(where, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size() || v[0] == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad_value(where, "expected a nonnegative integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad_value(where, "expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  bad_value(where, "expected 1|0|true|false, got '" + v + "'");
}

std::vector<std::int64_t> to_int_list(const std::string& v, const std::string& where) {
  std::vector<std::int64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item), where));
  if (out.empty()) bad_value(where, "expected a comma list of integers");
  return out;
}

void set_value(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where) {
  auto& bb = cfg.model.backbone;
  if (section == "backbone") {
    if (key == "channels") {
      const auto channels = to_int_list(value, where);
      std::vector<ConvStage> stages;
      for (const std::int64_t c : channels) {
        ConvStage st;
        st.out_channels = c;
        stages.push_back(st);
      }
      bb.stages = stages;
      return;
    }
    if (key == "strides") {
      const auto strides = to_int_list(value, where);
      if (strides.size() != bb.stages.size()) {
        bad_value(where, std::to_string(strides.size()) + " strides for " +
                             std::to_string(bb.stages.size()) +
                             " stages (set channels before strides)");
      }
      for (std::size_t i = 0; i < strides.size(); ++i) bb.stages[i].stride = strides[i];
      return;
    }
    if (key == "last_stride") {
      bb.last_stage_stride = to_int(value, where);
      return;
    }
    if (key == "input_size") {
      bb.input_size = to_int(value, where);
      return;
    }
  } else if (section == "head") {
    if (key == "h_parts") {
      cfg.model.scheme.h_parts = to_int(value, where);
      return;
    }
    if (key == "v_parts") {
      cfg.model.scheme.v_parts = to_int(value, where);
      return;
    }
    if (key == "reduce_dim") {
      cfg.model.reduce_dim = to_int(value, where);
      return;
    }
    if (key == "dropout") {
      cfg.model.dropout_rate = to_double(value, where);
      return;
    }
    if (key == "branch") {
      try {
        cfg.model.branch_mode = branch_mode_from(value);
      } catch (const DataError& e) {
        bad_value(where, e.what());
      }
      return;
    }
  } else if (section == "bn") {
    if (key == "momentum") {
      cfg.model.bn_momentum = to_double(value, where);
      return;
    }
    if (key == "eps") {
      cfg.model.bn_eps = to_double(value, where);
      return;
    }
  } else if (section == "loss") {
    if (key == "lambda") {
      cfg.loss.lambda = to_double(value, where);
      return;
    }
    if (key == "epsilon") {
      cfg.loss.epsilon = to_double(value, where);
      return;
    }
  } else if (section == "optim") {
    if (key == "lr") {
      cfg.optim.base_lr = to_double(value, where);
      return;
    }
    if (key == "backbone_lr_divisor") {
      cfg.optim.backbone_lr_divisor = to_double(value, where);
      return;
    }
    if (key == "momentum") {
      cfg.optim.momentum = to_double(value, where);
      return;
    }
    if (key == "nesterov") {
      cfg.optim.nesterov = to_bool(value, where);
      return;
    }
    if (key == "weight_decay") {
      cfg.optim.weight_decay = to_double(value, where);
      return;
    }
    if (key == "decay_bn") {
      cfg.optim.decay_bn = to_bool(value, where);
      return;
    }
    if (key == "batch") {
      cfg.optim.batch_size = to_int(value, where);
      return;
    }
    if (key == "epochs") {
      cfg.optim.epochs = to_int(value, where);
      return;
    }
    if (key == "lr_step") {
      cfg.optim.lr_step = to_int(value, where);
      return;
    }
    if (key == "lr_gamma") {
      cfg.optim.lr_gamma = to_double(value, where);
      return;
    }
  } else if (section == "data") {
    if (key == "jitter") {
      cfg.jitter = to_double(value, where);
      return;
    }
    if (key == "flip_prob") {
      cfg.flip_prob = to_double(value, where);
      return;
    }
    if (key == "aspect") {
      try {
        cfg.aspect = aspect_from(value);
      } catch (const DataError& e) {
        bad_value(where, e.what());
      }
      return;
    }
  } else if (section == "eval") {
    if (key == "repetitions") {
      const std::int64_t r = to_int(value, where);
      if (r < 1) bad_value(where, "repetitions must be positive");
      cfg.repetitions = static_cast<int>(r);
      return;
    }
  } else if (section == "run") {
    if (key == "seed") {
      cfg.seed = to_u64(value, where);
      return;
    }
    if (key == "threads") {
      const std::int64_t t = to_int(value, where);
      if (t < 1) bad_value(where, "threads must be positive");
      cfg.threads = static_cast<int>(t);
      return;
    }
  } else {
    bad_value(where, "unknown section '" + section + "'");
  }
  bad_value(where, "unknown key '" + key + "' in section '" + section + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open '" + path + "'");
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw DataError("config: " + where + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw DataError("config: " + where + ": empty section name");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError("config: " + where + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw DataError("config: " + where + ": empty key");
    if (section.empty()) {
      throw DataError("config: " + where + ": key '" + key + "' outside any section");
    }
    set_value(cfg, section, key, value, where);
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::string where = "override '" + assignment + "'";
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw DataError("config: " + where + ": expected section.key=value");
  }
  const std::string target = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const std::size_t dot = target.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == target.size()) {
    throw DataError("config: " + where + ": expected section.key=value");
  }
  set_value(cfg, target.substr(0, dot), target.substr(dot + 1), value, where);
}

std::vector<std::string> echo_lines(const RunConfig& cfg) {
  const auto& bb = cfg.model.backbone;
  std::string channels, strides;
  for (std::size_t i = 0; i < bb.stages.size(); ++i) {
    if (i) {
      channels += ",";
      strides += ",";
    }
    channels += std::to_string(bb.stages[i].out_channels);
    strides += std::to_string(bb.stages[i].stride);
  }
  std::vector<std::string> lines;
  lines.push_back("backbone.channels = " + channels);
  lines.push_back("backbone.strides = " + strides);
  lines.push_back("backbone.last_stride = " + std::to_string(bb.last_stage_stride));
  lines.push_back("backbone.input_size = " + std::to_string(bb.input_size));
  lines.push_back("head.h_parts = " + std::to_string(cfg.model.scheme.h_parts));
  lines.push_back("head.v_parts = " + std::to_string(cfg.model.scheme.v_parts));
  lines.push_back("head.reduce_dim = " + std::to_string(cfg.model.reduce_dim));
  lines.push_back("head.dropout = " + fmt_double(cfg.model.dropout_rate));
  lines.push_back("head.branch = " + std::string(branch_mode_name(cfg.model.branch_mode)));
  lines.push_back("bn.momentum = " + fmt_double(cfg.model.bn_momentum));
  lines.push_back("bn.eps = " + fmt_double(cfg.model.bn_eps));
  lines.push_back("loss.lambda = " + fmt_double(cfg.loss.lambda));
  lines.push_back("loss.epsilon = " + fmt_double(cfg.loss.epsilon));
  lines.push_back("optim.lr = " + fmt_double(cfg.optim.base_lr));
  lines.push_back("optim.backbone_lr_divisor = " + fmt_double(cfg.optim.backbone_lr_divisor));
  lines.push_back("optim.momentum = " + fmt_double(cfg.optim.momentum));
  lines.push_back("optim.nesterov = " + std::string(cfg.optim.nesterov ? "1" : "0"));
  lines.push_back("optim.weight_decay = " + fmt_double(cfg.optim.weight_decay));
  lines.push_back("optim.decay_bn = " + std::string(cfg.optim.decay_bn ? "1" : "0"));
  lines.push_back("optim.batch = " + std::to_string(cfg.optim.batch_size));
  lines.push_back("optim.epochs = " + std::to_string(cfg.optim.epochs));
  lines.push_back("optim.lr_step = " + std::to_string(cfg.optim.lr_step));
  lines.push_back("optim.lr_gamma = " + fmt_double(cfg.optim.lr_gamma));
  lines.push_back("data.jitter = " + fmt_double(cfg.jitter));
  lines.push_back("data.flip_prob = " + fmt_double(cfg.flip_prob));
  lines.push_back("data.aspect = " + std::string(aspect_name(cfg.aspect)));
  lines.push_back("eval.repetitions = " + std::to_string(cfg.repetitions));
  lines.push_back("run.seed = " + std::to_string(cfg.seed));
  lines.push_back("run.threads = " + std::to_string(cfg.threads));
  return lines;
}

}  // namespace gpanet
