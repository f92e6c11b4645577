// Copyright 2026 The cdrloc Authors
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

#include "cdrloc/types.hpp"

#include "cdrloc/errors.hpp"

namespace cdrloc {

EventKind parse_event_kind(std::string_view text) {
  if (text == "CALL") return EventKind::kCall;
  if (text == "SMS") return EventKind::kSms;
  if (text == "DATA") return EventKind::kData;
  return EventKind::kOther;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kCall:
      return "CALL";
    case EventKind::kSms:
      return "SMS";
    case EventKind::kData:
      return "DATA";
    case EventKind::kOther:
      return "OTHER";
  }
  return "OTHER";
}

EpisodeLabel parse_episode_label(std::string_view text) {
  if (text == "MOVE") return EpisodeLabel::kMove;
  if (text == "STAY") return EpisodeLabel::kStay;
  throw ConfigError("unknown episode label: " + std::string(text));
}

std::string_view to_string(EpisodeLabel label) {
  switch (label) {
    case EpisodeLabel::kMove:
      return "MOVE";
    case EpisodeLabel::kStay:
      return "STAY";
  }
  return "STAY";
}

}  // namespace cdrloc
