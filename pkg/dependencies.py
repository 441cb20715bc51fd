from config.settings import Settings, get_settings
from models.model_spec import ModelSpec, load_model_spec


def settings_dependency() -> Settings:
    return get_settings()


def parse_model(document: dict) -> ModelSpec:
    """Validate a request's model document; ModelValidationError is turned into a 422 by the app."""
    return load_model_spec(document)
