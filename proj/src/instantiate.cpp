#include "simba/summaries.hpp"

namespace simba {

template class SpatialDomain<float>;
template struct BasisSystem<float>;
template class GibbsSampler<float>;
template class CaviUpdater<float>;

template BasisSystem<float> build_basis_system<float>(const SpatialDomain<float>&, const KernelConfig&, Index, Index,
                                                       std::uint64_t, InducingStrategy);
template TransformedDataset<float> transform_dataset<float>(const Dataset<float>&,
                                                            std::shared_ptr<const BasisSystem<float>>, MemoryMode);
template ChainOutput<float> run_chain<float>(const TransformedDataset<float>&, const PriorConfig&, const GibbsConfig&,
                                             Index, const ParameterState<float>*);
template VIResult<float> run_vi<float>(const TransformedDataset<float>&, const PriorConfig&, const VIConfig&,
                                       const VariationalState<float>*);
template std::vector<EffectMap> summarize_gibbs<float>(const std::vector<ParameterState<float>>&,
                                                       const BasisSystem<float>&, const SummaryOptions&,
                                                       const std::vector<std::string>&);
template std::vector<EffectMap> summarize_vi<float>(const VariationalState<float>&, const BasisSystem<float>&,
                                                    const SummaryOptions&, const std::vector<std::string>&, bool);

} // namespace simba
