#pragma once

#include <string>
#include <vector>

namespace mmcrf {

// Ordered label set of one modality. Regular labels are indexed 1..L;
// index 0 is reserved everywhere for the latent cut label and never
// appears in a LabelSpace itself.
struct LabelSpace {
    std::vector<std::string> names;

    int size() const { return static_cast<int>(names.size()); }

    const std::string& name(int label) const { return names[label - 1]; }

    // 1..L, or 0 when the name is not present.
    int index_of(const std::string& n) const {
        for (int i = 0; i < size(); ++i)
            if (names[i] == n)
                return i + 1;
        return 0;
    }

    bool operator==(const LabelSpace&) const = default;
};

struct ModalitySpec {
    std::string id;
    LabelSpace labels;
    int feature_dim = 0;

    bool operator==(const ModalitySpec&) const = default;
};

} // namespace mmcrf
