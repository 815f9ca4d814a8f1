// SPDX-License-Identifier: Apache-2.0

#include "vat/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "vat/digest.hpp"
#include "vat/error.hpp"

namespace vat {

namespace {

constexpr std::string_view kStandard =
    "Please reply in the following format:\n"
    "ANSWER: (your answer). Example: ANSWER: (A) Your response:";

constexpr std::string_view kCoT =
    "You should reply in the following format:\n"
    "ANSWER: (your answer). For example: ANSWER: (A). Please think step by step to obtain the "
    "answer:";

constexpr std::string_view kVAT =
    "Each image is provided together with an visual abstract converted from the original image. "
    "It helps you determine essential components in the image, including but not limited to "
    "spatial, structural, relational, and conceptual features, which can assist in reasoning. "
    "You should use both the original image and the sketch to inform your reasoning process. "
    "Sketches are really useful, you must fully utilize them to achieve the best performance. "
    "You should follow the format: ANSWER: (your answer). E.g.: ANSWER: (A). Your answer:";

constexpr std::string_view kVATCoT =
    "Each image is provided together with an visual abstract converted from the original image. "
    "It helps you determine essential components in the image, including but not limited to "
    "spatial, structural, relational, and conceptual features, which can assist in reasoning. "
    "You should use both the original image and the sketch to inform your reasoning process. "
    "Sketches are really useful, you must fully utilize them to achieve the best performance. "
    "You should reply in the following format:\n"
    "ANSWER: (your answer). For example: ANSWER: (A). Please think step by step to obtain the "
    "answer:";

// The Scaffold instruction repeats the sketch wording; kept as published.
constexpr std::string_view kScaffold =
    "Each image will be provided together with a corresponding sketch, which is directly "
    "converted from the original image. The sketch helps you determine essential components in "
    "the image, including but not limited to spatial, structural, relational, and conceptual "
    "features, which can assist in your reasoning process. You should use both the original "
    "image and the sketch to inform your reasoning process. Sketches are really useful, you must "
    "fully utilize them to achieve the best performance.\n"
    "You should reply in the following format: ANSWER: (your answer). For example: ANSWER: (A). "
    "Your answer:";

struct ModeName {
  std::string_view name;
  PromptMode mode;
};

constexpr std::array<ModeName, 16> kModeNames{{
    {"standard", PromptMode::Standard},
    {"cot", PromptMode::CoT},
    {"vat", PromptMode::VAT},
    {"vat-cot", PromptMode::VATCoT},
    {"blank", PromptMode::BlankSingle},
    {"img", PromptMode::ImgOnly},
    {"abstract", PromptMode::AbstractOnly},
    {"vat-blank", PromptMode::VATwithBlank},
    {"vat-img", PromptMode::VATwithImgRepeat},
    // aliases
    {"vat+cot", PromptMode::VATCoT},
    {"vatcot", PromptMode::VATCoT},
    {"img-only", PromptMode::ImgOnly},
    {"vis-abs", PromptMode::AbstractOnly},
    {"blank-single", PromptMode::BlankSingle},
    {"vat-w-blank", PromptMode::VATwithBlank},
    {"vat-w-img", PromptMode::VATwithImgRepeat},
}};

std::string lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (!std::isspace(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

ImagePart image_part(std::shared_ptr<const EncodedImage> img, PartRole role) {
  return ImagePart{std::move(img), role, {}};
}

PromptBundle assemble(std::string_view question, std::vector<ImagePart> images, PromptMode mode,
                      std::vector<AbstractStyle> styles) {
  PromptBundle bundle;
  bundle.mode = mode;
  bundle.abstract_styles = std::move(styles);
  bundle.parts.reserve(images.size() + 2);
  bundle.parts.emplace_back(TextPart{std::string(question), PartRole::Question});
  for (auto& part : images) bundle.parts.emplace_back(std::move(part));
  bundle.parts.emplace_back(TextPart{std::string(render_instruction(mode)), PartRole::Instruction});
  return bundle;
}

}  // namespace

std::string_view to_string(PromptMode mode) noexcept {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "unknown";
}

std::optional<PromptMode> parse_mode(std::string_view name) noexcept {
  const std::string key = lower(name);
  for (const auto& m : kModeNames) {
    if (key == m.name) return m.mode;
  }
  return std::nullopt;
}

bool requires_abstracts(PromptMode mode) noexcept {
  return mode == PromptMode::VAT || mode == PromptMode::VATCoT || mode == PromptMode::AbstractOnly;
}

std::optional<TemplateKind> parse_template(std::string_view name) noexcept {
  const std::string key = lower(name);
  if (key == "scaffold") return TemplateKind::Scaffold;
  const auto mode = parse_mode(key);
  if (!mode) return std::nullopt;
  switch (*mode) {
    case PromptMode::Standard: return TemplateKind::Standard;
    case PromptMode::CoT: return TemplateKind::CoT;
    case PromptMode::VAT: return TemplateKind::VAT;
    case PromptMode::VATCoT: return TemplateKind::VATCoT;
    default: return std::nullopt;
  }
}

std::string_view template_text(TemplateKind kind) noexcept {
  switch (kind) {
    case TemplateKind::Standard: return kStandard;
    case TemplateKind::CoT: return kCoT;
    case TemplateKind::VAT: return kVAT;
    case TemplateKind::VATCoT: return kVATCoT;
    case TemplateKind::Scaffold: return kScaffold;
  }
  return {};
}

std::string_view render_instruction(PromptMode mode) noexcept {
  switch (mode) {
    case PromptMode::Standard:
    case PromptMode::BlankSingle:
    case PromptMode::ImgOnly:
    case PromptMode::AbstractOnly:
      return kStandard;
    case PromptMode::CoT:
      return kCoT;
    case PromptMode::VAT:
    case PromptMode::VATwithBlank:
    case PromptMode::VATwithImgRepeat:
      return kVAT;
    case PromptMode::VATCoT:
      return kVATCoT;
  }
  return kStandard;
}

std::string_view scaffold_template() noexcept { return kScaffold; }

std::shared_ptr<const EncodedImage> encode_for_prompt(RasterImage image) {
  std::string png = encode_png(image);
  std::string digest = sha256_hex(png);
  return std::make_shared<const EncodedImage>(
      EncodedImage{std::move(image), std::move(png), std::move(digest)});
}

std::string_view to_string(PartRole role) noexcept {
  switch (role) {
    case PartRole::Question: return "question";
    case PartRole::Original: return "original";
    case PartRole::Abstract: return "abstract";
    case PartRole::Blank: return "blank";
    case PartRole::Composite: return "composite";
    case PartRole::Instruction: return "instruction";
    case PartRole::Context: return "context";
  }
  return "unknown";
}

std::size_t PromptBundle::image_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(parts.begin(), parts.end(), [](const auto& p) {
    return std::holds_alternative<ImagePart>(p);
  }));
}

std::size_t PromptBundle::count_role(PartRole role) const noexcept {
  std::size_t n = 0;
  for (const auto& p : parts) {
    std::visit([&](const auto& part) { n += part.role == role; }, p);
  }
  return n;
}

RasterImage blank_placeholder(const RasterImage& original) {
  return RasterImage(original.width(), original.height(), 1, Sample{255});
}

PromptBundle build_prompt(std::string_view question,
                          std::span<const std::shared_ptr<const EncodedImage>> originals,
                          PromptMode mode, std::span<const VisualAbstract> abstracts) {
  const std::size_t n = originals.size();
  std::vector<AbstractStyle> styles;
  std::vector<std::shared_ptr<const EncodedImage>> abstract_images;

  if (requires_abstracts(mode)) {
    if (n == 0 || abstracts.empty() || abstracts.size() % n != 0) {
      throw MissingAbstract("mode '" + std::string(to_string(mode)) + "' needs " +
                            std::to_string(n) + " abstract(s) per style, got " +
                            std::to_string(abstracts.size()));
    }
    for (std::size_t k = 0; k < abstracts.size(); ++k) {
      const VisualAbstract& va = abstracts[k];
      const std::size_t i = k % n;
      if (va.source_digest != image_digest(originals[i]->image)) {
        throw MissingAbstract("abstract #" + std::to_string(k) +
                              " was not derived from original image #" + std::to_string(i));
      }
      if (i == 0) styles.push_back(va.style);
      else if (va.style != styles.back()) {
        throw MissingAbstract("abstracts of one style must be contiguous and cover every image");
      }
      abstract_images.push_back(encode_for_prompt(va.image));
    }
  }

  std::vector<ImagePart> images;
  auto add_originals = [&] {
    for (const auto& img : originals) images.push_back(image_part(img, PartRole::Original));
  };
  auto add_blanks = [&] {
    for (const auto& img : originals) {
      images.push_back(image_part(encode_for_prompt(blank_placeholder(img->image)), PartRole::Blank));
    }
  };
  auto add_abstracts = [&] {
    for (const auto& img : abstract_images) images.push_back(image_part(img, PartRole::Abstract));
  };

  switch (mode) {
    case PromptMode::Standard:
    case PromptMode::CoT:
    case PromptMode::ImgOnly:
      add_originals();
      break;
    case PromptMode::VAT:
    case PromptMode::VATCoT:
      add_originals();
      add_abstracts();
      break;
    case PromptMode::BlankSingle:
      add_blanks();
      break;
    case PromptMode::AbstractOnly:
      add_abstracts();
      break;
    case PromptMode::VATwithBlank:
      add_originals();
      add_blanks();
      break;
    case PromptMode::VATwithImgRepeat:
      add_originals();
      add_originals();
      break;
  }
  return assemble(question, std::move(images), mode, std::move(styles));
}

PromptBundle build_dual_prompt(std::string_view question,
                               std::span<const std::shared_ptr<const EncodedImage>> originals,
                               std::vector<ImagePart> seconds, PromptMode mode) {
  std::vector<ImagePart> images;
  images.reserve(originals.size() + seconds.size());
  for (const auto& img : originals) images.push_back(image_part(img, PartRole::Original));
  for (auto& part : seconds) images.push_back(std::move(part));
  return assemble(question, std::move(images), mode, {});
}

PromptBundle build_single_prompt(std::string_view question, std::vector<ImagePart> images,
                                 PromptMode mode) {
  return assemble(question, std::move(images), mode, {});
}

}  // namespace vat
