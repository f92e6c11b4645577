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

#ifndef CDRLOC_TYPES_HPP_
#define CDRLOC_TYPES_HPP_

#include <string>
#include <string_view>

namespace cdrloc {

/// Billing event kind from the CDR feed.
enum class EventKind { kCall, kSms, kData, kOther };

/// Unknown strings map to kOther.
EventKind parse_event_kind(std::string_view s);
std::string_view to_string(EventKind kind);

/// Movement episode annotation.
enum class EpisodeLabel { kMove, kStay };

/// Throws ConfigError for strings outside the annotation vocabulary.
EpisodeLabel parse_episode_label(std::string_view s);
std::string_view to_string(EpisodeLabel label);

}  // namespace cdrloc

#endif  // CDRLOC_TYPES_HPP_
