"""
佈局引擎常數定義
"""
import math
from enum import Enum


class RoomType(str, Enum):
    """房間類型枚舉"""
    LIVING_ROOM = "living_room"    # 客廳
    BATHROOM = "bathroom"          # 浴室
    DINING_ROOM = "dining_room"    # 餐廳
    KITCHEN = "kitchen"            # 廚房
    BEDROOM = "bedroom"            # 臥室


class Mount(str, Enum):
    """家具安裝方式枚舉"""
    FLOOR = "floor"      # 落地
    WALL = "wall"        # 壁掛
    CEILING = "ceiling"  # 吊頂
    ON_TOP = "on_top"    # 置於其他家具上


class WallId(str, Enum):
    """牆面枚舉"""
    NORTH = "north"
    SOUTH = "south"
    EAST = "east"
    WEST = "west"


class RelationKind(str, Enum):
    """空間關係類型枚舉"""
    # 與建築的關係
    AGAINST_WALL = "against_wall"
    NEAR_WALL = "near_wall"
    AWAY_FROM_WALL = "away_from_wall"
    CORNER = "corner"
    CEILING_MOUNTED = "ceiling_mounted"
    ON_FLOOR = "on_floor"
    # 方向
    IN_FRONT_OF = "in_front_of"
    BEHIND = "behind"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    # 朝向
    FACE_TO_FACE = "face_to_face"
    BACK_TO_BACK = "back_to_back"
    # 位置
    SIDE_BY_SIDE = "side_by_side"
    ALIGNED_WITH = "aligned_with"
    # 垂直
    ON_TOP_OF = "on_top_of"
    # 距離
    TOUCHING = "touching"
    NEAR = "near"
    FAR_FROM = "far_from"
    DISTANCE_RANGE = "distance_range"


class ConstraintKind(str, Enum):
    """約束類型枚舉 (5-tuple 的 T)"""
    DISTANCE = "distance"
    OVERLAP_FREE = "overlap_free"
    ORIENTATION = "orientation"
    POSITION = "position"
    ALIGNMENT = "alignment"
    ON_TOP_OF = "on_top_of"
    SIZE = "size"
    COLOR = "color"
    MATERIAL = "material"
    COUNT = "count"


class Comparator(str, Enum):
    """約束比較方式 (5-tuple 的 R)"""
    RANGE = "range"
    EQUALS = "equals"
    PREDICATE = "predicate"


class ViolationCategory(str, Enum):
    """違規類別"""
    SPATIAL = "spatial"
    ATTRIBUTE = "attribute"
    COUNT = "count"


class ActionKind(str, Enum):
    """修正動作類型"""
    TRANSLATE = "translate"
    ROTATE = "rotate"
    RESIZE = "resize"
    SET_COLOR = "set_color"
    SET_MATERIAL = "set_material"
    ADD_ITEM = "add_item"
    REMOVE_ITEM = "remove_item"
    SWAP_POSITIONS = "swap_positions"


class ConflictType(str, Enum):
    """擺放衝突類型"""
    WALL_COLLISION = "wall_collision"
    FURNITURE_COLLISION = "furniture_collision"


class CollisionType(str, Enum):
    """碰撞紀錄類型"""
    FURNITURE = "furniture"
    WALL = "wall"


class IssueSeverity(str, Enum):
    """驗證問題嚴重程度"""
    ERROR = "error"
    WARNING = "warning"


class DistanceMetric(str, Enum):
    """距離量測方式"""
    CENTER = "center"
    SURFACE = "surface"


class BenchStrategy(str, Enum):
    """基準測試策略"""
    CAPS = "caps"
    NO_CAPS = "no_caps"
    RANDOM = "random"


# 文件格式版本
SCENE_SCHEMA = "roomcraft/1"
LAYOUT_SCHEMA = "roomcraft-layout/1"

# 建築虛擬節點
WALL_PREFIX = "wall:"
WALL_IDS = tuple(f"{WALL_PREFIX}{wall.value}" for wall in WallId)
ARCHITECTURAL_IDS = WALL_IDS + ("floor", "ceiling")

# 牆面對應的對面牆
OPPOSITE_WALL = {
    WallId.NORTH: WallId.SOUTH,
    WallId.SOUTH: WallId.NORTH,
    WallId.EAST: WallId.WEST,
    WallId.WEST: WallId.EAST,
}

# 靠牆家具背對牆面時的朝向 (yaw 0 朝北)
WALL_FACING_YAW = {
    WallId.NORTH: math.pi,
    WallId.SOUTH: 0.0,
    WallId.EAST: math.pi / 2,
    WallId.WEST: 3 * math.pi / 2,
}

# 最近牆面判定的固定順序
WALL_ORDER = (WallId.NORTH, WallId.SOUTH, WallId.EAST, WallId.WEST)

CARDINAL_YAWS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)

# 幾何容許值
OVERLAP_TOLERANCE = 1e-4   # m²
MAGNITUDE_EPSILON = 1e-9
MIN_GRID_STEP = 0.025       # m

# 房間尺寸範圍
ROOM_MIN_SIZE = 1.0
ROOM_MAX_SIZE = 50.0

DEFAULT_DOOR_WIDTH = 0.9


def wall_pseudo_id(wall: WallId) -> str:
    """取得牆面的虛擬節點 ID"""
    return f"{WALL_PREFIX}{wall.value}"


def parse_wall_id(ref: str) -> WallId:
    """將 `wall:north` 形式的參照轉為 WallId"""
    return WallId(ref[len(WALL_PREFIX):])


def is_wall_ref(ref: str) -> bool:
    return ref in WALL_IDS


def is_architectural(ref: str) -> bool:
    return ref in ARCHITECTURAL_IDS
