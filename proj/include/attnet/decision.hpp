#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace attnet {

// Both corner alphabets share one slot layout, which is also the ordering of
// the activation vectors:
//   0 axis move, 1 diagonal move, 2 other-axis move, 3 stop, 4 reject.
inline constexpr std::size_t kDecisionSlots = 5;
inline constexpr std::size_t kStopSlot = 3;
inline constexpr std::size_t kRejectSlot = 4;

enum class TlDecision : std::uint8_t { Right = 0, RightDown = 1, Down = 2, Stop = 3, Reject = 4 };
enum class BrDecision : std::uint8_t { Left = 0, LeftUp = 1, Up = 2, Stop = 3, Reject = 4 };

template <typename D>
concept CornerDecision = std::same_as<D, TlDecision> || std::same_as<D, BrDecision>;

template <CornerDecision D>
constexpr std::size_t slot(D d) noexcept {
  return static_cast<std::size_t>(d);
}

template <CornerDecision D>
constexpr D from_slot(std::size_t s) noexcept {
  return static_cast<D>(s);
}

template <CornerDecision D>
constexpr bool is_move(D d) noexcept {
  return slot(d) < kStopSlot;
}

constexpr std::string_view to_string(TlDecision d) noexcept {
  constexpr std::array<std::string_view, kDecisionSlots> names{"right", "right-down", "down", "stop",
                                                               "reject"};
  return names[slot(d)];
}

constexpr std::string_view to_string(BrDecision d) noexcept {
  constexpr std::array<std::string_view, kDecisionSlots> names{"left", "left-up", "up", "stop",
                                                               "reject"};
  return names[slot(d)];
}

template <CornerDecision D>
constexpr std::optional<D> parse_decision(std::string_view name) noexcept {
  for (std::size_t s = 0; s < kDecisionSlots; ++s) {
    if (to_string(from_slot<D>(s)) == name) return from_slot<D>(s);
  }
  return std::nullopt;
}

struct CornerLabels {
  TlDecision tl = TlDecision::Reject;
  BrDecision br = BrDecision::Reject;

  friend constexpr bool operator==(const CornerLabels&, const CornerLabels&) = default;

  constexpr bool rejected() const noexcept {
    return tl == TlDecision::Reject && br == BrDecision::Reject;
  }
  constexpr bool stopped() const noexcept {
    return tl == TlDecision::Stop && br == BrDecision::Stop;
  }
};

// The 16 positive (tl, br) pairs, TL-major.
constexpr std::array<CornerLabels, 16> positive_combos() noexcept {
  std::array<CornerLabels, 16> out{};
  std::size_t k = 0;
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t b = 0; b < 4; ++b)
      out[k++] = {from_slot<TlDecision>(t), from_slot<BrDecision>(b)};
  return out;
}

}  // namespace attnet
