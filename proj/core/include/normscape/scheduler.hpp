#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "normscape/errors.hpp"

namespace normscape {

struct PlateauConfig {
    double lr_initial = 0.01;
    double decay_factor = 10.0;
    int64_t plateau_epochs = 5;

    void validate() const {
        if (!(lr_initial > 0.0)) throw ConfigError("scheduler: lr_initial must be > 0");
        if (!(decay_factor > 1.0)) throw ConfigError("scheduler: decay_factor must be > 1");
        if (plateau_epochs < 1) throw ConfigError("scheduler: plateau_epochs must be >= 1");
    }
};

// Divides the learning rate by decay_factor whenever the best-so-far
// validation error has gone `plateau_epochs` consecutive epochs without a
// strict improvement; the staleness counter resets after each drop.
class PlateauScheduler {
public:
    explicit PlateauScheduler(const PlateauConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

    // Feed one epoch's validation error; returns true when a drop fires.
    bool observe(double validation_error) {
        if (validation_error < best_) {
            best_ = validation_error;
            stale_ = 0;
            return false;
        }
        ++stale_;
        if (stale_ >= cfg_.plateau_epochs) {
            ++drops_;
            stale_ = 0;
            return true;
        }
        return false;
    }

    double lr() const { return cfg_.lr_initial / std::pow(cfg_.decay_factor, static_cast<double>(drops_)); }
    double best() const { return best_; }
    int64_t stale_epochs() const { return stale_; }
    int64_t drops() const { return drops_; }

    // Reinstates mid-run state when resuming from a checkpoint.
    void restore(double best, int64_t stale_epochs, int64_t drops) {
        best_ = best;
        stale_ = stale_epochs;
        drops_ = drops;
    }

private:
    PlateauConfig cfg_;
    double best_ = std::numeric_limits<double>::infinity();
    int64_t stale_ = 0;
    int64_t drops_ = 0;
};

}  // namespace normscape
