from cellwhatif.forecaster.graph import GraphicalModel, default_graph  # noqa: F401
from cellwhatif.forecaster.model import (  # noqa: F401
    ClusterModel,
    ClusterModelConfig,
    ForecastModel,
    build_forecast_model,
    forecast,
    reconstruct,
)
from cellwhatif.forecaster.scaler import (  # noqa: F401
    Scaler,
    apply_scaler,
    fit_scaler,
    invert_scaler,
)
from cellwhatif.forecaster.training import (  # noqa: F401
    AdamW,
    TrainConfig,
    grad_check,
    masked_mse,
    pretrain,
)
from cellwhatif.forecaster.windows import (  # noqa: F401
    WindowSample,
    build_windows,
    seasonal_naive,
    window_at,
)
