package coll;

import static org.junit.Assert.assertEquals;

import org.junit.Test;

public class BoxTest {

    @Test
    public void testGet() {
        assertEquals("v", new Box<>("v").get());
    }

    @Test
    public void testMap() {
        assertEquals(Integer.valueOf(3), new Box<>("abc").map(String::length).get());
    }

    @Test
    public void testOf() {
        assertEquals("a", Box.of("a", "b").get());
    }
}
