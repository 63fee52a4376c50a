from __future__ import annotations

import pkgutil

# Modules starting with an underscore are helpers, not extensions.
EXTENSIONS = sorted(
    module.name
    for module in pkgutil.iter_modules(__path__, f"{__package__}.")
    if not module.name.rpartition(".")[2].startswith("_")
)
