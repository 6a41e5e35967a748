#include "simba/summaries.hpp"

namespace simba {

double evidence_score(double p_value, int sign) {
    if (!(p_value >= 0 && p_value <= 1)) throw std::invalid_argument("evidence_score: p-value outside [0, 1]");
    if (sign != 1 && sign != -1) throw std::invalid_argument("evidence_score: sign must be +1 or -1");
    return sign * (1.0 - p_value);
}

double evidence_from_pplus(double p_plus) {
    if (!(p_plus >= 0 && p_plus <= 1)) throw std::invalid_argument("evidence_from_pplus: probability outside [0, 1]");
    return 2.0 * p_plus - 1.0;
}

} // namespace simba
