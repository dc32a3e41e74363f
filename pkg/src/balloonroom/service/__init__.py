from .app import ServiceSettings, create_app, dispatch, dispatch_raw

__all__ = ["ServiceSettings", "create_app", "dispatch", "dispatch_raw"]
