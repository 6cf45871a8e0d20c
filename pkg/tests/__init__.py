# RoomCraft 測試套件
