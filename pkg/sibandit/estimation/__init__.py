from .lpe import LinkModel, LpeEstimate, bandwidth_hn, fit_link, fit_predict, floor_strict
from .mrc import (DECREASING, INCREASING, IndexEstimate, MrcSearchConfig, choose_direction,
                  concordance_counts, maximize_mrc, rank_objective)
from .sireg import (ConstantEstimator, RewardEstimator, SingleIndexRegressor, fit_sireg,
                    predict, split_samples)
