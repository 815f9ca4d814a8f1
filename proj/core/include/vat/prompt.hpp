// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vat/abstraction.hpp"
#include "vat/image.hpp"

namespace vat {

enum class PromptMode {
  Standard,
  CoT,
  VAT,
  VATCoT,
  BlankSingle,       // single image: white placeholder instead of I
  ImgOnly,           // single image: I
  AbstractOnly,      // single image: V_a instead of I
  VATwithBlank,      // dual image: I + white placeholder
  VATwithImgRepeat,  // dual image: I + I
};

std::string_view to_string(PromptMode mode) noexcept;
/// Accepts the to_string() names plus a few aliases (e.g. "vat+cot").
std::optional<PromptMode> parse_mode(std::string_view name) noexcept;
bool requires_abstracts(PromptMode mode) noexcept;

/// Templates that can be rendered; Scaffold has no prompt mode of its own.
enum class TemplateKind { Standard, CoT, VAT, VATCoT, Scaffold };

std::optional<TemplateKind> parse_template(std::string_view name) noexcept;
std::string_view template_text(TemplateKind kind) noexcept;

/// The instruction block appended to every prompt of `mode`.
std::string_view render_instruction(PromptMode mode) noexcept;

/// The Scaffold baseline template, kept verbatim as a reference artifact.
std::string_view scaffold_template() noexcept;

/// An image as sent to a model: pixels, lossless PNG, and the PNG's digest.
struct EncodedImage {
  RasterImage image;
  std::string png;
  std::string digest;  // sha256 of `png`
};

std::shared_ptr<const EncodedImage> encode_for_prompt(RasterImage image);

enum class PartRole { Question, Original, Abstract, Blank, Composite, Instruction, Context };

std::string_view to_string(PartRole role) noexcept;

struct TextPart {
  std::string text;
  PartRole role = PartRole::Question;
};

struct ImagePart {
  std::shared_ptr<const EncodedImage> image;
  PartRole role = PartRole::Original;
  /// Free-form numeric metadata (e.g. block counts of an ablation composite).
  /// Not sent to live backends; scripted mocks may read it. Part of the cache key.
  std::map<std::string, double> annotations;
};

using PromptPart = std::variant<TextPart, ImagePart>;

struct PromptBundle {
  std::vector<PromptPart> parts;
  PromptMode mode = PromptMode::Standard;
  std::vector<AbstractStyle> abstract_styles;

  std::size_t image_count() const noexcept;
  std::size_t count_role(PartRole role) const noexcept;
};

/// Lay out question, images, and instruction for `mode`:
///   [question, originals..., abstracts grouped by style..., instruction]
/// with the single/dual-image ablation modes substituting placeholders.
/// `abstracts` holds originals.size() entries per style, style-major; each
/// entry's source_digest must match the original at the same position.
/// Throws MissingAbstract when a mode needs abstracts that are absent.
PromptBundle build_prompt(std::string_view question,
                          std::span<const std::shared_ptr<const EncodedImage>> originals,
                          PromptMode mode, std::span<const VisualAbstract> abstracts = {});

/// Dual-image layout with caller-provided second images (ablation composites):
///   [question, originals..., seconds..., instruction(mode)]
PromptBundle build_dual_prompt(std::string_view question,
                               std::span<const std::shared_ptr<const EncodedImage>> originals,
                               std::vector<ImagePart> seconds, PromptMode mode);

/// Single-image layout with caller-provided images: [question, images..., instruction(mode)]
PromptBundle build_single_prompt(std::string_view question, std::vector<ImagePart> images,
                                 PromptMode mode);

/// The white placeholder used by the Blank ablation modes.
RasterImage blank_placeholder(const RasterImage& original);

}  // namespace vat
