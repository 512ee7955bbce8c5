#pragma once

// Ordered part labels as RGB anchors. Exactly one label must be named
// "background"; colors must be pairwise separated by at least 0.3 in L2.

#include <string>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/linalg.hpp"

namespace partsplat {

inline constexpr double kMinPaletteDistance = 0.3;
inline constexpr const char* kBackgroundLabelName = "background";

class LabelPalette {
  public:
    struct Label {
        std::string name;
        Vec3 color;  // components in [0, 1]
    };

    explicit LabelPalette(std::vector<Label> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) throw ParameterError("palette: need at least 2 labels");
        background_ = labels_.size();
        for (size_t i = 0; i < labels_.size(); ++i) {
            const Vec3& c = labels_[i].color;
            for (double v : {c.x, c.y, c.z})
                if (v < 0.0 || v > 1.0)
                    throw ParameterError("palette: color components must lie in [0,1]");
            if (labels_[i].name == kBackgroundLabelName) {
                if (background_ != labels_.size())
                    throw ParameterError("palette: more than one background label");
                background_ = i;
            }
            for (size_t j = 0; j < i; ++j)
                if (distance(labels_[i].color, labels_[j].color) < kMinPaletteDistance)
                    throw ParameterError("palette: colors of '" + labels_[i].name + "' and '" +
                                         labels_[j].name + "' are closer than 0.3");
        }
        if (background_ == labels_.size())
            throw ParameterError("palette: no label named 'background'");
    }

    size_t size() const { return labels_.size(); }
    const Label& operator[](size_t i) const { return labels_[i]; }
    size_t background() const { return background_; }

    size_t index_of(const std::string& name) const {
        for (size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i].name == name) return i;
        throw ParameterError("palette: no label named '" + name + "'");
    }

    // Nearest palette color in L2; ties go to the lower index.
    size_t nearest(const Vec3& color) const {
        size_t best = 0;
        double best_d = distance(color, labels_[0].color);
        for (size_t i = 1; i < labels_.size(); ++i) {
            const double d = distance(color, labels_[i].color);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

  private:
    std::vector<Label> labels_;
    size_t background_;
};

}  // namespace partsplat
