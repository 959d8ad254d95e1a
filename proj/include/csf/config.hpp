#pragma once

#include <map>
#include <string>
#include <vector>

#include "csf/common.hpp"
#include "csf/filters.hpp"
#include "csf/schedule.hpp"
#include "csf/score_net.hpp"
#include "csf/set_encoder.hpp"
#include "csf/ssm.hpp"
#include "csf/training.hpp"

namespace csf {

/// Flat key=value configuration with # comments and dotted block prefixes
/// (model.dt, filter.particles, ...).
class Config {
   public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key) const;       // comma-separated
    std::vector<std::string> get_list(const std::string& key) const;   // comma-separated

    /// Original file text, echoed verbatim into reports.
    const std::string& raw_text() const { return raw_; }

   private:
    std::map<std::string, std::string> values_;
    std::string raw_;
};

StateSpaceModel model_from_config(const Config& cfg);
NoiseSchedule schedule_from_config(const Config& cfg);
EncoderConfig encoder_from_config(const Config& cfg);
ScoreNetConfig score_from_config(const Config& cfg);
TrainConfig train_from_config(const Config& cfg);
ShockSpec shocks_from_config(const Config& cfg, int steps);
GuidanceOpts guidance_from_config(const Config& cfg);
SfConfig sf_from_config(const Config& cfg);

}  // namespace csf
