def require_plugin(import_error: ImportError, libraries: list[str], plugin_name: str):
    raise ImportError(
        f"Missing plugin {plugin_name}! To use the {plugin_name} plugin, you must install the "
        f"following libraries: {libraries}. You can install this with sctkg[{plugin_name}] or "
        f"pip install {' '.join(libraries)} (replace with your package manager of choice)."
    ) from import_error
