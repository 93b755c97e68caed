#include "crl/state.hpp"

#include <algorithm>

namespace crl {

ClientState plus_ex(ClientState s, int k, int L) {
  assert(k >= 0);
  return {std::min(s.x + k, L), s.y};
}

ClientState minus_ex(ClientState s, int k, int M) {
  assert(k >= 0);
  int bump = (k > 0 && s.x == k) ? 1 : 0;
  return {std::max(s.x - k, 0), std::min(s.y + bump, M)};
}

}  // namespace crl
