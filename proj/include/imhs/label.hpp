#pragma once

#include <string>
#include <string_view>

namespace imhs {

/// Binary gold/predicted label. ImHate is the positive class everywhere.
enum class Label { ImHate, NoHate };

inline std::string_view to_string(Label l) { return l == Label::ImHate ? "im_hate" : "no_hate"; }

inline Label flip(Label l) { return l == Label::ImHate ? Label::NoHate : Label::ImHate; }

}  // namespace imhs
