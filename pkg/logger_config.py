import logging
import sys
from logging.handlers import RotatingFileHandler
import os
import warnings

# --- Централизованная настройка логгера ---

log_directory = "logs"
log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_configured = False


def setup_logging(level: str = None, log_dir: str = log_directory) -> logging.Logger:
    """
    Настраивает корневой логгер: файл с ротацией + консоль.

    Повторный вызов ничего не делает.

    Args:
        level: Уровень логирования (по умолчанию из MACHLIM_LOG_LEVEL или INFO)
        log_dir: Папка для логов

    Returns:
        Логгер пакета
    """
    global _configured
    if _configured:
        return logging.getLogger("machlim")

    level = (level or os.environ.get("MACHLIM_LOG_LEVEL", "INFO")).upper()

    # 1. Убедимся, что папка для логов существует
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    formatter = logging.Formatter(log_format)

    # 2. Файл будет достигать 5MB, после чего будет создан новый (machlim.log.1)
    file_handler = RotatingFileHandler(
        os.path.join(log_dir, "machlim.log"),
        maxBytes=5*1024*1024,
        backupCount=1,
        encoding='utf-8'
    )
    file_handler.setFormatter(formatter)

    # 3. Вывод в консоль
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(formatter)

    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        handlers=[
            file_handler,
            stream_handler
        ]
    )
    quiet_numpy_warnings()
    _configured = True
    return logging.getLogger("machlim")


def quiet_numpy_warnings():
    """Подавляет предупреждения numpy о переполнении и делении на ноль"""
    # Нефинитные значения ловим явно и поднимаем NumericalError
    warnings.filterwarnings("ignore", category=RuntimeWarning, module="numpy")
